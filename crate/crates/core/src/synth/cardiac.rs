//! ECG with jittered RR intervals and the cardiac-locked BCG on EEG leads.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::R_PEAK_LABEL;
use crate::signal::{MarkerList, Modality, Recording};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CardiacConfig {
    pub enabled: bool,
    pub bpm: f64,
    /// RR intervals are drawn uniformly within ±this fraction.
    pub hrv_jitter: f64,
    pub r_amplitude_uv: f64,
    pub ecg_snr_db: f64,
    pub bcg_peak_uv: f64,
    pub bcg_duration_s: f64,
    pub delay_s: f64,
    /// Per-beat BCG amplitude spread, uniform ±fraction.
    pub amplitude_jitter: f64,
    /// Per-beat BCG latency spread, uniform ±seconds.
    pub latency_jitter_s: f64,
    /// One gain per EEG channel.
    pub gains: Vec<f64>,
}

impl Default for CardiacConfig {
    fn default() -> Self {
        CardiacConfig {
            enabled: true,
            bpm: 60.0,
            hrv_jitter: 0.05,
            r_amplitude_uv: 1000.0,
            ecg_snr_db: 20.0,
            bcg_peak_uv: 60.0,
            bcg_duration_s: 0.5,
            delay_s: 0.21,
            amplitude_jitter: 0.1,
            latency_jitter_s: 0.01,
            // C3 C4 F3 F4 FPz O1 O2 M1 M2; the mastoids mirror each other
            gains: vec![0.8, -0.75, 0.7, -0.7, 0.9, 0.85, -0.9, 1.0, -1.0],
        }
    }
}

impl CardiacConfig {
    pub fn validate(&self, n_eeg: usize) -> Result<()> {
        if !(30.0..=180.0).contains(&self.bpm) {
            return Err(Error::InvalidParam(format!("bpm must lie in [30, 180], got {}", self.bpm)));
        }
        if !(0.0..0.5).contains(&self.hrv_jitter) || !(0.0..1.0).contains(&self.amplitude_jitter) {
            return Err(Error::InvalidParam("jitter fractions out of range".into()));
        }
        if self.gains.len() != n_eeg {
            return Err(Error::InvalidParam(format!("{} BCG gains for {n_eeg} EEG channels", self.gains.len())));
        }
        if !(self.bcg_duration_s > 0.0 && self.delay_s >= 0.0 && self.latency_jitter_s >= 0.0) {
            return Err(Error::InvalidParam("BCG timing must be non-negative".into()));
        }
        Ok(())
    }
}

fn gauss(t: f64, mu: f64, sigma: f64) -> f64 {
    (-(t - mu).powi(2) / (2.0 * sigma * sigma)).exp()
}

/// PQRST complex in units of the R amplitude, `t` relative to the R peak.
pub fn ecg_beat(t: f64) -> f64 {
    0.12 * gauss(t, -0.18, 0.025) - 0.1 * gauss(t, -0.03, 0.008) + gauss(t, 0.0, 0.01)
        - 0.1 * gauss(t, 0.03, 0.008)
        + 0.2 * gauss(t, 0.25, 0.04)
}

/// Zero-mean biphasic BCG shape with unit peak that starts and ends at zero.
pub fn bcg_waveform(duration_s: f64, rate_hz: f64) -> Vec<f64> {
    let n = (duration_s * rate_hz).round() as usize;
    let d = duration_s;
    let hann = |t: f64| (std::f64::consts::PI * t / d).sin().powi(2);
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate_hz;
            gauss(t, 0.2 * d, 0.07 * d) - 0.8 * gauss(t, 0.5 * d, 0.09 * d) + 0.3 * gauss(t, 0.76 * d, 0.07 * d)
        })
        .collect();
    let h: Vec<f64> = (0..n).map(|i| hann(i as f64 / rate_hz)).collect();
    let tapered: Vec<f64> = raw.iter().zip(&h).map(|(r, w)| r * w).collect();
    let k = stats::mean(&tapered) / stats::mean(&h);
    let shaped: Vec<f64> = tapered.iter().zip(&h).map(|(v, w)| v - k * w).collect();
    let peak = shaped.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    shaped.into_iter().map(|v| v / peak).collect()
}

/// Writes the ECG into the single ECG channel and the BCG into the EEG
/// channels. Returns the recording, the addend and the true R peaks.
pub fn synth_ecg_and_bcg(rec: &Recording, cfg: &CardiacConfig, seed: u64) -> Result<(Recording, Array2<f64>, MarkerList)> {
    let eeg: Vec<usize> = (0..rec.n_channels())
        .filter(|&c| rec.channels()[c].modality == Modality::Eeg)
        .collect();
    cfg.validate(eeg.len())?;
    let ecg_ch = rec
        .channels()
        .iter()
        .position(|c| c.modality == Modality::Ecg)
        .ok_or_else(|| Error::InvalidParam("montage has no ECG channel".into()))?;
    let rate = rec.rate_hz();
    let n = rec.n_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let rr = 60.0 / cfg.bpm;
    let mut peaks = Vec::new();
    let mut t = rng.random_range(0.2..0.2 + rr);
    while ((t * rate).round() as usize) < n {
        peaks.push((t * rate).round() as usize);
        let j = if cfg.hrv_jitter > 0.0 {
            rng.random_range(-cfg.hrv_jitter..=cfg.hrv_jitter)
        } else {
            0.0
        };
        t += rr * (1.0 + j);
    }

    let mut addend = Array2::zeros(rec.data().dim());
    // ECG: beats plus white noise at the configured SNR
    let half = (0.4 * rate) as isize;
    let beat: Vec<f64> = (-half..=half).map(|i| ecg_beat(i as f64 / rate)).collect();
    let mut ecg = vec![0.0; n];
    for &p in &peaks {
        for (k, b) in beat.iter().enumerate() {
            let at = p as isize + k as isize - half;
            if at >= 0 && (at as usize) < n {
                ecg[at as usize] += cfg.r_amplitude_uv * b;
            }
        }
    }
    let noise_sd = stats::rms(&ecg) / 10f64.powf(cfg.ecg_snr_db / 20.0);
    for (j, v) in ecg.iter().enumerate() {
        let e: f64 = rng.sample(StandardNormal);
        addend[[ecg_ch, j]] = v + noise_sd * e;
    }

    let wave = bcg_waveform(cfg.bcg_duration_s, rate);
    for &p in &peaks {
        let a = 1.0 + rng.random_range(-1.0..=1.0) * cfg.amplitude_jitter;
        let lat = cfg.delay_s + rng.random_range(-1.0..=1.0) * cfg.latency_jitter_s;
        let start = p as f64 + lat * rate;
        let start = start.round() as usize;
        for (&c, &g) in eeg.iter().zip(&cfg.gains) {
            let amp = cfg.bcg_peak_uv * g * a;
            for (i, w) in wave.iter().enumerate() {
                if start + i >= n {
                    break;
                }
                addend[[c, start + i]] += amp * w;
            }
        }
    }
    let out = rec.with_data(rec.data() + &addend)?;
    Ok((out, addend, MarkerList::from_samples(&peaks, R_PEAK_LABEL)))
}
