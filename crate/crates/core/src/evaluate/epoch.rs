//! Marker-locked epochs, trial averages and ERP comparison.

use ndarray::{s, Array2, Array3, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal::Recording;
use crate::stats;

/// Trials × channels × samples, cut around markers.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub data: Array3<f64>,
    /// Seconds before and after each marker.
    pub window_s: (f64, f64),
    pub rate_hz: f64,
    pub trial_labels: Vec<String>,
    /// Marker sample of each kept trial.
    pub trial_samples: Vec<usize>,
    pub channel_names: Vec<String>,
    /// Markers whose window did not fit inside the recording.
    pub dropped: usize,
}

impl EpochSet {
    pub fn n_trials(&self) -> usize {
        self.data.len_of(Axis(0))
    }

    pub fn n_channels(&self) -> usize {
        self.data.len_of(Axis(1))
    }

    pub fn n_samples(&self) -> usize {
        self.data.len_of(Axis(2))
    }

    /// Samples before the marker.
    pub fn pre_samples(&self) -> usize {
        (self.window_s.0 * self.rate_hz).round() as usize
    }

    /// Time of sample `i` relative to the marker, in seconds.
    pub fn time_s(&self, i: usize) -> f64 {
        (i as f64 - self.pre_samples() as f64) / self.rate_hz
    }
}

/// Cuts `[m - pre, m + post)` around every marker whose label matches
/// `pattern` (a trailing `*` matches any suffix).
pub fn epoch(rec: &Recording, pattern: &str, pre_s: f64, post_s: f64) -> Result<EpochSet> {
    if !(pre_s >= 0.0 && post_s > 0.0) {
        return Err(Error::InvalidParam(format!(
            "epoch window must have pre >= 0 and post > 0, got ({pre_s}, {post_s})"
        )));
    }
    let rate = rec.rate_hz();
    let pre = (pre_s * rate).round() as usize;
    let post = (post_s * rate).round() as usize;
    let len = pre + post;
    let selected = rec.markers().with_label(pattern);
    let n = rec.n_samples();
    let mut kept = Vec::new();
    let mut dropped = 0;
    for m in selected.iter() {
        if m.sample >= pre && m.sample + post <= n {
            kept.push(m.clone());
        } else {
            dropped += 1;
        }
    }
    if kept.is_empty() {
        return Err(Error::NoTrials { dropped });
    }
    let mut data = Array3::zeros((kept.len(), rec.n_channels(), len));
    for (t, m) in kept.iter().enumerate() {
        let lo = m.sample - pre;
        data.slice_mut(s![t, .., ..])
            .assign(&rec.data().slice(s![.., lo..lo + len]));
    }
    Ok(EpochSet {
        data,
        window_s: (pre_s, post_s),
        rate_hz: rate,
        trial_labels: kept.iter().map(|m| m.label.clone()).collect(),
        trial_samples: kept.iter().map(|m| m.sample).collect(),
        channel_names: rec.channels().iter().map(|c| c.name.clone()).collect(),
        dropped,
    })
}

/// Trial mean, optionally subtracting each trial's mean over a baseline
/// interval given in seconds relative to the marker.
pub fn average_erp(epochs: &EpochSet, baseline: Option<(f64, f64)>) -> Result<Array2<f64>> {
    let n_trials = epochs.n_trials();
    if n_trials == 0 {
        return Err(Error::NoTrials { dropped: epochs.dropped });
    }
    let range = match baseline {
        None => None,
        Some((a, b)) => {
            let (pre, post) = epochs.window_s;
            if !(a < b && a >= -pre - 1e-12 && b <= post + 1e-12) {
                return Err(Error::InvalidParam(format!(
                    "baseline ({a}, {b}) s lies outside the epoch window (-{pre}, {post}) s"
                )));
            }
            let p = epochs.pre_samples() as f64;
            let lo = (p + a * epochs.rate_hz).round().max(0.0) as usize;
            let hi = ((p + b * epochs.rate_hz).round() as usize).min(epochs.n_samples());
            if hi <= lo {
                return Err(Error::InvalidParam("baseline interval is empty".into()));
            }
            Some((lo, hi))
        }
    };
    let mut sum = Array2::zeros((epochs.n_channels(), epochs.n_samples()));
    for trial in epochs.data.outer_iter() {
        match range {
            None => sum += &trial,
            Some((lo, hi)) => {
                for (mut acc, row) in sum.outer_iter_mut().zip(trial.outer_iter()) {
                    let b = row.slice(s![lo..hi]).mean().unwrap_or(0.0);
                    acc.zip_mut_with(&row, |a, v| *a += v - b);
                }
            }
        }
    }
    Ok(sum / n_trials as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErpCorrelation {
    /// `None` where either channel has zero variance.
    pub per_channel: Vec<Option<f64>>,
    pub mean: Option<f64>,
    /// Sample standard deviation over defined channels.
    pub sd: Option<f64>,
}

/// Pearson r per channel between two ERPs of the same shape.
pub fn erp_channel_correlation(a: &Array2<f64>, b: &Array2<f64>) -> Result<ErpCorrelation> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    let per_channel: Vec<Option<f64>> = a
        .outer_iter()
        .zip(b.outer_iter())
        .map(|(x, y)| stats::pearson(x.iter(), y.iter()))
        .collect();
    let defined: Vec<f64> = per_channel.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| stats::mean(&defined));
    let sd = match (mean, defined.len()) {
        (Some(m), n) if n >= 2 => {
            Some((defined.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt())
        }
        (Some(_), _) => Some(0.0),
        _ => None,
    };
    Ok(ErpCorrelation { per_channel, mean, sd })
}

/// Largest absolute value per channel of an ERP.
pub fn peak_amplitudes(erp: &Array2<f64>) -> Vec<f64> {
    erp.outer_iter()
        .map(|row| row.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect()
}
