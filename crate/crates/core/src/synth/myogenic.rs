//! Speech-related EMG bursts and eye blinks, observed in the reference leads
//! and mixed into the EEG.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::protocol::GO;
use crate::error::{Error, Result};
use crate::signal::{Butterworth, Marker, MarkerList, Modality, Recording};
use crate::stats;

pub const BURST_START: &str = "EMG_BURST_START";
pub const BURST_END: &str = "EMG_BURST_END";
pub const BLINK: &str = "BLINK";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BurstSpec {
    /// Number of independent EMG sources.
    pub n_sources: usize,
    pub band_hz: (f64, f64),
    /// In-burst RMS of each source.
    pub rms_uv: f64,
    /// Burst onset after each GO marker.
    pub onset_after_go_s: f64,
    pub duration_s: f64,
    /// Uniform ± spread of the onset.
    pub onset_jitter_s: f64,
    /// Raised-cosine ramp at each end of a burst.
    pub ramp_s: f64,
}

impl Default for BurstSpec {
    fn default() -> Self {
        BurstSpec {
            n_sources: 2,
            band_hz: (20.0, 450.0),
            rms_uv: 60.0,
            onset_after_go_s: 0.2,
            duration_s: 1.0,
            onset_jitter_s: 0.05,
            ramp_s: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlinkSpec {
    pub enabled: bool,
    pub amplitude_uv: f64,
    /// Gaussian width of a blink.
    pub width_s: f64,
    /// One blink per trial at GO + this, jittered uniformly by `jitter_s`.
    pub after_go_s: f64,
    pub jitter_s: f64,
    /// Extra blinks at uniformly random times.
    pub random_rate_hz: f64,
    pub amplitude_jitter: f64,
}

impl Default for BlinkSpec {
    fn default() -> Self {
        BlinkSpec {
            enabled: true,
            amplitude_uv: 340.0,
            width_s: 0.06,
            after_go_s: 1.3,
            jitter_s: 0.1,
            random_rate_hz: 0.1,
            amplitude_jitter: 0.2,
        }
    }
}

/// Linear maps from the sources (EMG sources then the blink source) into the
/// EEG channels and the reference leads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixingSpec {
    /// n_eeg rows × n_sources columns.
    pub eeg: Vec<Vec<f64>>,
    /// Rows follow the EOG then EMG channels in montage order.
    pub refs: Vec<Vec<f64>>,
    /// White sensor noise on each reference lead.
    pub ref_noise_uv: f64,
}

impl Default for MixingSpec {
    fn default() -> Self {
        MixingSpec {
            // columns: left EMG, right EMG, blink
            eeg: vec![
                vec![0.30, 0.10, 0.04], // C3
                vec![0.10, 0.30, 0.04], // C4
                vec![0.45, 0.20, 0.12], // F3
                vec![0.20, 0.45, 0.12], // F4
                vec![0.35, 0.35, 0.25], // FPz
                vec![0.04, 0.03, 0.01], // O1
                vec![0.03, 0.04, 0.01], // O2
                vec![0.40, 0.12, 0.02], // M1
                vec![0.12, 0.40, 0.02], // M2
            ],
            refs: vec![
                vec![0.05, 0.02, 1.0], // EOG1
                vec![0.02, 0.05, -0.8], // EOG2
                vec![1.0, 0.10, 0.0],  // EMG1
                vec![0.10, 1.0, 0.0],  // EMG2
                vec![0.60, 0.60, 0.02], // EMG3
            ],
            ref_noise_uv: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MyogenicConfig {
    pub enabled: bool,
    pub bursts: BurstSpec,
    pub blinks: BlinkSpec,
    pub mixing: MixingSpec,
}

impl Default for MyogenicConfig {
    fn default() -> Self {
        MyogenicConfig {
            enabled: true,
            bursts: BurstSpec::default(),
            blinks: BlinkSpec::default(),
            mixing: MixingSpec::default(),
        }
    }
}

impl MyogenicConfig {
    pub fn n_sources(&self) -> usize {
        self.bursts.n_sources + usize::from(self.blinks.enabled)
    }
}

/// What the generator planted.
#[derive(Debug, Clone, PartialEq)]
pub struct MyogenicTruth {
    /// n_sources × n source time courses.
    pub sources: Array2<f64>,
    pub events: MarkerList,
}

fn burst_envelope(len: usize, ramp: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let edge = i.min(len - 1 - i);
            if edge >= ramp || ramp == 0 {
                1.0
            } else {
                0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / ramp as f64).cos()
            }
        })
        .collect()
}

/// Adds EMG bursts locked to the GO markers of `rec` and blinks, writing the
/// observed sources into the EOG/EMG leads and `mixing.eeg` into the EEG.
pub fn add_myogenic_ocular(rec: &Recording, cfg: &MyogenicConfig, seed: u64) -> Result<(Recording, Array2<f64>, MyogenicTruth)> {
    let by = |m: Modality| -> Vec<usize> {
        (0..rec.n_channels())
            .filter(|&c| rec.channels()[c].modality == m)
            .collect()
    };
    let eeg = by(Modality::Eeg);
    let mut refs = by(Modality::Eog);
    refs.extend(by(Modality::Emg));
    let k = cfg.n_sources();
    let mx = &cfg.mixing;
    if mx.eeg.len() != eeg.len() || mx.eeg.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidParam(format!("EEG mixing must be {} x {k}", eeg.len())));
    }
    if mx.refs.len() != refs.len() || mx.refs.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidParam(format!("reference mixing must be {} x {k}", refs.len())));
    }
    let rate = rec.rate_hz();
    let n = rec.n_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = Array2::zeros((k, n));
    let mut events = Vec::new();
    let gos = rec.markers().with_label(GO).samples();

    let b = &cfg.bursts;
    if b.n_sources > 0 {
        let filt = Butterworth::bandpass(4, b.band_hz.0, b.band_hz.1, rate)?;
        let len = (b.duration_s * rate).round() as usize;
        let ramp = ((b.ramp_s * rate).round() as usize).min(len / 2);
        let env = burst_envelope(len, ramp);
        for s in 0..b.n_sources {
            let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let mut noise = filt.filtfilt(&white);
            let sd = stats::rms(&noise).max(f64::MIN_POSITIVE);
            noise.iter_mut().for_each(|v| *v *= b.rms_uv / sd);
            for &g in &gos {
                let jit = rng.random_range(-1.0..=1.0) * b.onset_jitter_s;
                let on = g as f64 + (b.onset_after_go_s + jit) * rate;
                let on = on.round().max(0.0) as usize;
                if on >= n {
                    continue;
                }
                if s == 0 {
                    events.push(Marker::new(on, BURST_START));
                    events.push(Marker::new((on + len).min(n - 1), BURST_END));
                }
                for (i, e) in env.iter().enumerate() {
                    if on + i >= n {
                        break;
                    }
                    sources[[s, on + i]] += e * noise[on + i];
                }
            }
        }
    }

    let bl = &cfg.blinks;
    if bl.enabled {
        let row = b.n_sources;
        let mut times: Vec<f64> = gos
            .iter()
            .map(|&g| g as f64 / rate + bl.after_go_s + rng.random_range(-1.0..=1.0) * bl.jitter_s)
            .collect();
        if bl.random_rate_hz > 0.0 {
            let count = (bl.random_rate_hz * n as f64 / rate).round() as usize;
            times.extend((0..count).map(|_| rng.random_range(0.0..n as f64 / rate)));
        }
        let half = (4.0 * bl.width_s * rate).round() as isize;
        for t in times {
            let amp = bl.amplitude_uv * (1.0 + rng.random_range(-1.0..=1.0) * bl.amplitude_jitter);
            let centre = (t * rate).round() as isize;
            if centre < 0 || centre as usize >= n {
                continue;
            }
            events.push(Marker::new(centre as usize, BLINK));
            for d in -half..=half {
                let at = centre + d;
                if at < 0 || at as usize >= n {
                    continue;
                }
                let x = d as f64 / (bl.width_s * rate);
                sources[[row, at as usize]] += amp * (-0.5 * x * x).exp();
            }
        }
    }

    let mut addend = Array2::zeros(rec.data().dim());
    for (&c, weights) in eeg.iter().zip(&mx.eeg) {
        for (s, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                addend.row_mut(c).scaled_add(w, &sources.row(s));
            }
        }
    }
    for (&c, weights) in refs.iter().zip(&mx.refs) {
        for (s, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                addend.row_mut(c).scaled_add(w, &sources.row(s));
            }
        }
        if mx.ref_noise_uv > 0.0 {
            let mut row = addend.row_mut(c);
            for v in row.iter_mut() {
                let e: f64 = rng.sample(StandardNormal);
                *v += mx.ref_noise_uv * e;
            }
        }
    }
    let out = rec.with_data(rec.data() + &addend)?;
    Ok((
        out,
        addend,
        MyogenicTruth {
            sources,
            events: MarkerList::from_unsorted(events),
        },
    ))
}
