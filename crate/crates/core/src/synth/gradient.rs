//! Periodic gradient-switching artifact.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::ONSET_LABEL;
use crate::signal::{MarkerList, Recording};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaShape {
    Sawtooth,
    /// Sawtooth plus integer-cycle harmonics.
    #[default]
    MultiHarmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradientConfig {
    pub enabled: bool,
    pub period_samples: usize,
    pub amplitude_uv: f64,
    pub shape: GaShape,
    /// Relative amplitude growth per repetition.
    pub drift_rate: f64,
    pub scan_start_s: f64,
    /// One gain per montage channel.
    pub gains: Vec<f64>,
}

impl Default for GradientConfig {
    fn default() -> Self {
        GradientConfig {
            enabled: true,
            period_samples: 101,
            amplitude_uv: 5000.0,
            shape: GaShape::MultiHarmonic,
            drift_rate: 0.001,
            scan_start_s: 0.2,
            // 9 EEG, 2 EOG, 3 EMG, ECG
            gains: vec![
                1.0, 0.95, 0.85, 0.9, 0.7, 0.8, 0.75, 0.6, 0.65, 0.5, 0.55, 0.4, 0.45, 0.5, 0.3,
            ],
        }
    }
}

/// One repetition with zero mean and unit peak: a falling ramp that jumps
/// back up at the onset.
pub fn gradient_waveform(shape: GaShape, period: usize) -> Vec<f64> {
    let p = period as f64;
    let raw: Vec<f64> = (0..period)
        .map(|i| {
            let phase = i as f64 / p;
            let saw = 1.0 - 2.0 * (i as f64 + 0.5) / p;
            match shape {
                GaShape::Sawtooth => saw,
                GaShape::MultiHarmonic => {
                    saw + 0.35 * (2.0 * PI * 3.0 * phase).sin() + 0.2 * (2.0 * PI * 7.0 * phase).cos()
                        - 0.1 * (2.0 * PI * 12.0 * phase).sin()
                }
            }
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / p;
    let centred: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    let peak = centred.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    centred.into_iter().map(|v| v / peak).collect()
}

/// Adds the artifact to every channel from the scan start to the end of the
/// recording. Returns the contaminated recording, the addend and the true
/// repetition onsets.
pub fn add_gradient_artifact(rec: &Recording, cfg: &GradientConfig) -> Result<(Recording, Array2<f64>, MarkerList)> {
    if cfg.period_samples < 10 {
        return Err(Error::InvalidParam(format!("period must be >= 10 samples, got {}", cfg.period_samples)));
    }
    if !(cfg.amplitude_uv > 0.0) {
        return Err(Error::InvalidParam("gradient amplitude must be positive".into()));
    }
    if cfg.gains.len() != rec.n_channels() {
        return Err(Error::InvalidParam(format!(
            "{} gradient gains for {} channels",
            cfg.gains.len(),
            rec.n_channels()
        )));
    }
    let n = rec.n_samples();
    let period = cfg.period_samples;
    let start = (cfg.scan_start_s * rec.rate_hz()).round() as usize;
    let wave = gradient_waveform(cfg.shape, period);
    let onsets: Vec<usize> = (start..n).step_by(period).collect();
    let mut addend = Array2::zeros(rec.data().dim());
    for (c, &g) in cfg.gains.iter().enumerate() {
        let mut row = addend.row_mut(c);
        for (r, &s) in onsets.iter().enumerate() {
            let amp = cfg.amplitude_uv * g * (1.0 + cfg.drift_rate * r as f64);
            for (i, w) in wave.iter().enumerate() {
                if s + i >= n {
                    break;
                }
                row[s + i] = amp * w;
            }
        }
    }
    let out = rec.with_data(rec.data() + &addend)?;
    Ok((out, addend, MarkerList::from_samples(&onsets, ONSET_LABEL)))
}
