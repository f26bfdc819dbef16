//! Synthetic sessions with full ground truth.
//!
//! A session is built additively: clean EEG, then the gradient artifact, the
//! ECG/BCG, and finally EMG bursts and blinks. Every addend is retained so
//! each correction stage can be scored against what was planted.

mod cardiac;
mod eeg;
mod gradient;
mod myogenic;
mod protocol;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use cardiac::{bcg_waveform, ecg_beat, synth_ecg_and_bcg, CardiacConfig};
pub use eeg::{erp_template, synth_clean_eeg, CleanEegConfig, ErpConfig};
pub use gradient::{add_gradient_artifact, gradient_waveform, GaShape, GradientConfig};
pub use myogenic::{
    add_myogenic_ocular, BlinkSpec, BurstSpec, MixingSpec, MyogenicConfig, MyogenicTruth, BLINK, BURST_END,
    BURST_START,
};
pub use protocol::{
    generate_protocol, Protocol, ProtocolConfig, BLANK, FIX, GO, ITI_START, REST_END, REST_START, STIM_PREFIX,
    VCV_WORDS,
};

use crate::error::{Error, Result};
use crate::signal::io::write_json;
use crate::signal::{
    save_recording, standard_montage, write_markers_csv, Marker, MarkerList, Modality, Recording, ACQUISITION_RATE_HZ,
};

pub const SCAN_START: &str = "SCAN_START";
pub const SCAN_END: &str = "SCAN_END";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub rate_hz: f64,
    pub protocol: ProtocolConfig,
    pub eeg: CleanEegConfig,
    pub gradient: GradientConfig,
    pub cardiac: CardiacConfig,
    pub myogenic: MyogenicConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            rate_hz: ACQUISITION_RATE_HZ,
            protocol: ProtocolConfig::default(),
            eeg: CleanEegConfig::default(),
            gradient: GradientConfig::default(),
            cardiac: CardiacConfig::default(),
            myogenic: MyogenicConfig::default(),
        }
    }
}

/// Matrices used to inject each contamination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingTruth {
    pub gradient_gains: Vec<f64>,
    pub bcg_gains: Vec<f64>,
    pub myogenic: MixingSpec,
}

/// Full-montage contributions; `contaminated` is their sum with the clean EEG.
#[derive(Debug, Clone, PartialEq)]
pub struct Addends {
    pub gradient: Array2<f64>,
    pub cardiac: Array2<f64>,
    pub myogenic: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTruth {
    pub contaminated: Recording,
    pub clean_eeg: Recording,
    pub addends: Addends,
    /// GA onsets, R peaks, protocol events, burst and blink times.
    pub true_onsets: MarkerList,
    pub mixing_truth: MixingTruth,
    pub sources: Array2<f64>,
    pub protocol: Protocol,
}

impl SessionTruth {
    /// Clean EEG placed in the full montage, zero elsewhere.
    pub fn clean_full(&self) -> Array2<f64> {
        let mut full = Array2::zeros(self.contaminated.data().dim());
        for (i, ch) in self.clean_eeg.channels().iter().enumerate() {
            let c = self.contaminated.channel_index(&ch.name).expect("montage channel");
            full.row_mut(c).assign(&self.clean_eeg.channel(i));
        }
        full
    }

    /// The contaminated recording minus the gradient addend.
    pub fn gradient_free(&self) -> Recording {
        self.contaminated
            .with_data(self.contaminated.data() - &self.addends.gradient)
            .expect("same shape")
    }

    /// The contaminated recording minus the gradient and cardiac addends.
    pub fn cardiac_free(&self) -> Recording {
        let data = self.contaminated.data() - &self.addends.gradient - &self.addends.cardiac;
        self.contaminated.with_data(data).expect("same shape")
    }

    pub fn true_markers(&self, pattern: &str) -> MarkerList {
        self.true_onsets.with_label(pattern)
    }

    /// Writes `contaminated/` and `clean/` containers, `truth_markers.csv`
    /// and `mixing.json` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        save_recording(&self.contaminated, dir.join("contaminated"))?;
        save_recording(&self.clean_eeg, dir.join("clean"))?;
        write_markers_csv(&self.true_onsets, dir.join("truth_markers.csv"))?;
        write_json(dir.join("mixing.json"), &self.mixing_truth)
    }
}

/// Stream seed for component `k` of a session.
fn sub_seed(seed: u64, k: u64) -> u64 {
    seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Composes every generator; the session seed also drives the protocol.
pub fn generate_session(cfg: &SessionConfig, seed: u64) -> Result<SessionTruth> {
    let mut pcfg = cfg.protocol.clone();
    pcfg.seed = sub_seed(seed, 1);
    let protocol = generate_protocol(&pcfg, cfg.rate_hz)?;
    let clean_eeg = synth_clean_eeg(&protocol, cfg.rate_hz, &cfg.eeg, sub_seed(seed, 2))?;

    let montage = standard_montage();
    let n = protocol.n_samples;
    let mut base = Array2::zeros((montage.len(), n));
    for (i, ch) in clean_eeg.channels().iter().enumerate() {
        let c = montage.iter().position(|m| m.name == ch.name).expect("EEG in montage");
        base.row_mut(c).assign(&clean_eeg.channel(i));
    }
    let mut rec = Recording::new(cfg.rate_hz, montage, base, protocol.markers.clone())?;
    let mut truth_markers = protocol.markers.clone();
    let dim = rec.data().dim();

    let gradient = if cfg.gradient.enabled {
        let (r, add, onsets) = add_gradient_artifact(&rec, &cfg.gradient)?;
        rec = r;
        if let (Some(first), Some(_)) = (onsets.as_slice().first(), onsets.as_slice().last()) {
            let scan = MarkerList::from_unsorted(vec![Marker::new(first.sample, SCAN_START), Marker::new(n - 1, SCAN_END)]);
            let mut markers = rec.markers().clone();
            markers.merge(&scan);
            rec = rec.with_markers(markers)?;
            truth_markers.merge(&scan);
        }
        truth_markers.merge(&onsets);
        add
    } else {
        Array2::zeros(dim)
    };

    let cardiac = if cfg.cardiac.enabled {
        let (r, add, peaks) = synth_ecg_and_bcg(&rec, &cfg.cardiac, sub_seed(seed, 3))?;
        rec = r;
        truth_markers.merge(&peaks);
        add
    } else {
        Array2::zeros(dim)
    };

    let (myogenic, sources) = if cfg.myogenic.enabled {
        let (r, add, t) = add_myogenic_ocular(&rec, &cfg.myogenic, sub_seed(seed, 4))?;
        rec = r;
        truth_markers.merge(&t.events);
        (add, t.sources)
    } else {
        (Array2::zeros(dim), Array2::zeros((0, n)))
    };

    if rec.channels().iter().filter(|c| c.modality == Modality::Eeg).count() != clean_eeg.n_channels() {
        return Err(Error::InvalidParam("montage and clean EEG disagree".into()));
    }
    Ok(SessionTruth {
        contaminated: rec,
        clean_eeg,
        addends: Addends {
            gradient,
            cardiac,
            myogenic,
        },
        true_onsets: truth_markers,
        mixing_truth: MixingTruth {
            gradient_gains: cfg.gradient.gains.clone(),
            bcg_gains: cfg.cardiac.gains.clone(),
            myogenic: cfg.myogenic.mixing.clone(),
        },
        sources,
        protocol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> SessionConfig {
        SessionConfig {
            rate_hz: 1000.0,
            protocol: ProtocolConfig {
                n_trials: 3,
                rest_s: 6.0,
                ..ProtocolConfig::default()
            },
            gradient: GradientConfig {
                period_samples: 40,
                ..GradientConfig::default()
            },
            ..SessionConfig::default()
        }
    }

    #[test]
    fn default_montage_and_rate() {
        let cfg = SessionConfig::default();
        assert_eq!(cfg.rate_hz, 5000.0);
        let s = generate_session(&short(), 1).unwrap();
        assert_eq!(s.contaminated.n_channels(), 15);
        let count = |m: Modality| s.contaminated.channels().iter().filter(|c| c.modality == m).count();
        assert_eq!(
            (count(Modality::Eeg), count(Modality::Eog), count(Modality::Emg), count(Modality::Ecg)),
            (9, 2, 3, 1)
        );
        assert_eq!(s.clean_eeg.n_samples(), s.contaminated.n_samples());
        assert!(s.true_onsets.iter().all(|m| m.sample < s.contaminated.n_samples()));
    }

    #[test]
    fn contaminated_is_the_sum_of_its_parts() {
        let s = generate_session(&short(), 2).unwrap();
        let sum = s.clean_full() + &s.addends.gradient + &s.addends.cardiac + &s.addends.myogenic;
        let worst = (&sum - s.contaminated.data()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-9, "{worst}");
    }

    #[test]
    fn same_seed_same_session() {
        let a = generate_session(&short(), 3).unwrap();
        let b = generate_session(&short(), 3).unwrap();
        assert_eq!(a, b);
        let c = generate_session(&short(), 4).unwrap();
        assert_ne!(a.contaminated, c.contaminated);
    }

    #[test]
    fn disabled_stages_contribute_nothing() {
        let mut cfg = short();
        cfg.gradient.enabled = false;
        cfg.cardiac.enabled = false;
        cfg.myogenic.enabled = false;
        let s = generate_session(&cfg, 5).unwrap();
        assert_eq!(s.contaminated.data(), &s.clean_full());
    }

    #[test]
    fn write_produces_containers() {
        let s = generate_session(&short(), 6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.write(dir.path()).unwrap();
        let back = crate::signal::load_recording(dir.path().join("contaminated")).unwrap();
        assert_eq!(back, s.contaminated.quantized_f32());
        assert!(dir.path().join("truth_markers.csv").exists());
    }
}
