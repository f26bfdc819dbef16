//! Artifact attenuation, clock drift and image ROI SNR.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::spectrum::{harmonic_power, magnitude_spectrum};
use crate::error::{Error, Result};
use crate::signal::{MarkerList, Recording};

/// Reported in place of +∞ when the residual vanishes.
pub const ATTENUATION_CAP_DB: f64 = 120.0;

/// What counts as artifact power.
#[derive(Debug, Clone)]
pub enum AttenuationSpec {
    /// Power in ±1-bin bands at the first `n_harmonics` multiples of `f0_hz`.
    Harmonic { f0_hz: f64, n_harmonics: usize, n_fft: usize },
    /// Power of the average over event-locked windows `[p - pre, p + post)`.
    CardiacLocked { peaks: MarkerList, pre_s: f64, post_s: f64 },
    /// Mean-square deviation from a reference recording of the same shape.
    Truth(Recording),
}

/// `10·log10(P_before / P_after)` per channel, capped at 120 dB.
pub fn artifact_attenuation(before: &Recording, after: &Recording, spec: &AttenuationSpec) -> Result<Vec<f64>> {
    check_shape(before, after)?;
    let powers = |rec: &Recording| -> Result<Vec<f64>> {
        match spec {
            AttenuationSpec::Harmonic { f0_hz, n_harmonics, n_fft } => rec
                .data()
                .outer_iter()
                .map(|row| {
                    let s = magnitude_spectrum(&row.to_vec(), rec.rate_hz(), *n_fft)?;
                    harmonic_power(&s, *f0_hz, *n_harmonics)
                })
                .collect(),
            AttenuationSpec::CardiacLocked { peaks, pre_s, post_s } => {
                let avg = locked_average(rec, peaks, *pre_s, *post_s)?;
                Ok(avg.outer_iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).collect())
            }
            AttenuationSpec::Truth(truth) => {
                check_shape(rec, truth)?;
                Ok(rec
                    .data()
                    .outer_iter()
                    .zip(truth.data().outer_iter())
                    .map(|(a, t)| {
                        a.iter().zip(t.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
                    })
                    .collect())
            }
        }
    };
    let pb = powers(before)?;
    let pa = powers(after)?;
    Ok(pb.iter().zip(&pa).map(|(&b, &a)| ratio_db(b, a)).collect())
}

fn ratio_db(before: f64, after: f64) -> f64 {
    if before == after {
        return 0.0;
    }
    if after <= 0.0 {
        return ATTENUATION_CAP_DB;
    }
    if before <= 0.0 {
        return -ATTENUATION_CAP_DB;
    }
    (10.0 * (before / after).log10()).clamp(-ATTENUATION_CAP_DB, ATTENUATION_CAP_DB)
}

fn check_shape(a: &Recording, b: &Recording) -> Result<()> {
    if a.data().dim() != b.data().dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.data().dim(), b.data().dim())));
    }
    Ok(())
}

/// Channels × window average of `rec` over every event that fits.
pub fn locked_average(rec: &Recording, events: &MarkerList, pre_s: f64, post_s: f64) -> Result<Array2<f64>> {
    let pre = (pre_s * rec.rate_hz()).round() as usize;
    let len = pre + (post_s * rec.rate_hz()).round() as usize;
    if len == 0 {
        return Err(Error::InvalidParam("empty locked-average window".into()));
    }
    let mut sum = Array2::zeros((rec.n_channels(), len));
    let mut count = 0usize;
    for m in events.iter() {
        if m.sample < pre || m.sample - pre + len > rec.n_samples() {
            continue;
        }
        let lo = m.sample - pre;
        sum += &rec.data().slice(ndarray::s![.., lo..lo + len]);
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoTrials { dropped: events.len() });
    }
    Ok(sum / count as f64)
}

/// Relative duration difference between the MRI stream and the EEG
/// trigger span, in milliseconds per second of MRI time.
pub fn estimate_drift(mri_frames: u64, frame_period_s: f64, eeg_trigger_span_s: f64) -> Result<f64> {
    if !(frame_period_s > 0.0) || mri_frames == 0 {
        return Err(Error::InvalidParam("MRI frame count and period must be positive".into()));
    }
    if !(eeg_trigger_span_s > 0.0) {
        return Err(Error::InvalidParam("zero trigger span".into()));
    }
    let video = mri_frames as f64 * frame_period_s;
    Ok((video - eeg_trigger_span_s).abs() / video * 1000.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub mri_frames: u64,
    pub frame_period_s: f64,
    pub eeg_trigger_span_s: f64,
    pub drift_ms_per_s: f64,
    pub threshold_ms_per_s: f64,
    pub exceeds_threshold: bool,
}

/// Drift plus the frame-size flag: anything above one frame period (in ms)
/// per second is flagged.
pub fn drift_report(mri_frames: u64, frame_period_s: f64, eeg_trigger_span_s: f64) -> Result<DriftReport> {
    let drift = estimate_drift(mri_frames, frame_period_s, eeg_trigger_span_s)?;
    let threshold = frame_period_s * 1000.0;
    Ok(DriftReport {
        mri_frames,
        frame_period_s,
        eeg_trigger_span_s,
        drift_ms_per_s: drift,
        threshold_ms_per_s: threshold,
        exceeds_threshold: drift > threshold,
    })
}

/// Mean over `roi` divided by the population standard deviation over `noise`.
pub fn roi_snr(image: &Array2<f64>, roi: &Array2<bool>, noise: &Array2<bool>) -> Result<f64> {
    if roi.dim() != image.dim() || noise.dim() != image.dim() {
        return Err(Error::ShapeMismatch("image and masks differ in shape".into()));
    }
    let mut overlap = false;
    Zip::from(roi).and(noise).for_each(|&r, &n| overlap |= r && n);
    if overlap {
        return Err(Error::InvalidParam("ROI and noise masks overlap".into()));
    }
    let pick = |mask: &Array2<bool>| -> Vec<f64> {
        image
            .iter()
            .zip(mask.iter())
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .collect()
    };
    let r = pick(roi);
    let n = pick(noise);
    if r.is_empty() || n.is_empty() {
        return Err(Error::InvalidParam("ROI and noise masks must be nonempty".into()));
    }
    let mean_r = r.iter().sum::<f64>() / r.len() as f64;
    let mean_n = n.iter().sum::<f64>() / n.len() as f64;
    let sd = (n.iter().map(|v| (v - mean_n).powi(2)).sum::<f64>() / n.len() as f64).sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroNoiseDeviation);
    }
    Ok(mean_r / sd)
}
