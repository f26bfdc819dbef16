//! Stimulus protocol timeline.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Marker, MarkerList};

/// The 18 VCV nonce words.
pub const VCV_WORDS: [&str; 18] = [
    "apa", "ata", "aka", "asa", "asha", "ala", "afa", "ara", "aha", "awa", "aya", "aba", "ada", "aga", "atha", "ama",
    "ana", "ava",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub n_trials: usize,
    pub words: Vec<String>,
    pub jitter_choices_s: Vec<f64>,
    pub fixation_s: f64,
    pub word_s: f64,
    pub go_s: f64,
    pub blank_s: f64,
    pub rest_s: f64,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_trials: 50,
            words: VCV_WORDS.iter().map(|w| w.to_string()).collect(),
            jitter_choices_s: vec![0.5, 0.75, 1.0],
            fixation_s: 0.5,
            word_s: 1.0,
            go_s: 2.0,
            blank_s: 0.5,
            rest_s: 60.0,
            seed: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidParam("n_trials must be positive".into()));
        }
        if self.words.is_empty() {
            return Err(Error::InvalidParam("word list is empty".into()));
        }
        if self.jitter_choices_s.is_empty() {
            return Err(Error::InvalidParam("jitter_choices_s is empty".into()));
        }
        let durations = [self.fixation_s, self.word_s, self.go_s, self.blank_s, self.rest_s];
        if durations
            .iter()
            .chain(&self.jitter_choices_s)
            .any(|d| !(*d > 0.0 && d.is_finite()))
        {
            return Err(Error::InvalidParam("protocol durations must be positive".into()));
        }
        Ok(())
    }
}

/// Marker timeline plus the recording length it spans.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub markers: MarkerList,
    pub n_samples: usize,
}

pub const REST_START: &str = "REST_START";
pub const REST_END: &str = "REST_END";
pub const ITI_START: &str = "ITI_START";
pub const FIX: &str = "FIX";
pub const STIM_PREFIX: &str = "STIM/";
pub const GO: &str = "GO";
pub const BLANK: &str = "BLANK";

/// Rest block, then per trial ITI → FIX → STIM/<word> → GO → BLANK. The
/// recording ends when the last blank screen does.
pub fn generate_protocol(cfg: &ProtocolConfig, rate_hz: f64) -> Result<Protocol> {
    cfg.validate()?;
    if !(rate_hz > 0.0) {
        return Err(Error::InvalidParam("rate must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut words = Vec::with_capacity(cfg.n_trials);
    while words.len() < cfg.n_trials {
        let mut pass = cfg.words.clone();
        pass.shuffle(&mut rng);
        words.extend(pass);
    }
    words.truncate(cfg.n_trials);

    let at = |t: f64| (t * rate_hz).round() as usize;
    let mut markers = vec![Marker::new(0, REST_START)];
    let mut t = cfg.rest_s;
    markers.push(Marker::new(at(t), REST_END));
    for word in &words {
        let iti = cfg.jitter_choices_s[rng.random_range(0..cfg.jitter_choices_s.len())];
        markers.push(Marker::new(at(t), ITI_START));
        t += iti;
        markers.push(Marker::new(at(t), FIX));
        t += cfg.fixation_s;
        markers.push(Marker::new(at(t), format!("{STIM_PREFIX}{word}")));
        t += cfg.word_s;
        markers.push(Marker::new(at(t), GO));
        t += cfg.go_s;
        markers.push(Marker::new(at(t), BLANK));
        t += cfg.blank_s;
    }
    Ok(Protocol {
        markers: MarkerList::from_sorted(markers)?,
        n_samples: at(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn single_trial_go_time() {
        let cfg = ProtocolConfig {
            n_trials: 1,
            jitter_choices_s: vec![0.5],
            ..ProtocolConfig::default()
        };
        let p = generate_protocol(&cfg, 5000.0).unwrap();
        let go = p.markers.with_label(GO);
        assert_eq!(go.samples(), vec![310_000]);
        assert_eq!(p.n_samples, (64.5 * 5000.0) as usize);
    }

    #[test]
    fn eighteen_trials_use_every_word_once() {
        let cfg = ProtocolConfig {
            n_trials: 18,
            ..ProtocolConfig::default()
        };
        let p = generate_protocol(&cfg, 1000.0).unwrap();
        let stims = p.markers.with_label("STIM/*");
        assert_eq!(stims.len(), 18);
        let words: BTreeSet<_> = stims.iter().map(|m| m.label.clone()).collect();
        assert_eq!(words.len(), 18);
    }

    #[test]
    fn same_seed_same_timeline() {
        let cfg = ProtocolConfig {
            seed: 9,
            ..ProtocolConfig::default()
        };
        assert_eq!(generate_protocol(&cfg, 5000.0).unwrap(), generate_protocol(&cfg, 5000.0).unwrap());
        let other = ProtocolConfig { seed: 10, ..cfg.clone() };
        assert_ne!(
            generate_protocol(&cfg, 5000.0).unwrap().markers,
            generate_protocol(&other, 5000.0).unwrap().markers
        );
    }

    #[test]
    fn segments_tile_the_recording() {
        let cfg = ProtocolConfig {
            n_trials: 30,
            ..ProtocolConfig::default()
        };
        let rate = 1000.0;
        let p = generate_protocol(&cfg, rate).unwrap();
        let m = p.markers.as_slice();
        assert_eq!(m[0].sample, 0);
        // each ITI_START coincides with the end of the previous block
        let starts = p.markers.with_label(ITI_START).samples();
        assert_eq!(starts[0], p.markers.with_label(REST_END).samples()[0]);
        let blanks = p.markers.with_label(BLANK).samples();
        for k in 1..starts.len() {
            assert_eq!(starts[k], blanks[k - 1] + (cfg.blank_s * rate) as usize);
        }
        assert_eq!(p.n_samples, blanks.last().unwrap() + (cfg.blank_s * rate) as usize);
        let fix = p.markers.with_label(FIX).samples();
        for (s, f) in starts.iter().zip(&fix) {
            let iti = (f - s) as f64 / rate;
            assert!(cfg.jitter_choices_s.iter().any(|c| (c - iti).abs() < 1e-9));
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = ProtocolConfig {
            words: vec![],
            ..ProtocolConfig::default()
        };
        assert!(generate_protocol(&bad, 5000.0).is_err());
        let bad = ProtocolConfig {
            go_s: 0.0,
            ..ProtocolConfig::default()
        };
        assert!(generate_protocol(&bad, 5000.0).is_err());
    }
}
