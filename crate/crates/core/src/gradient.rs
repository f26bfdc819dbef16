//! Gradient artifact detection and average artifact subtraction (AAS).
//!
//! Onsets are found with a gradient threshold on one lead: the absolute first
//! difference is compared against `threshold_factor` times its median over
//! the surrounding second, so slow amplitude drift does not hide early
//! repetitions. Crossings are merged into one event per repetition, and when the
//! acquisition period is a non-integer number of samples the events are
//! grouped into the smallest integer-sample super-period.
//!
//! Correction builds, for every repetition, a template from the `window_reps`
//! repetitions centred on it (each demeaned, truncated one-sided at the edges
//! of the run) and subtracts it, optionally after a small least-squares shift
//! search.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ChannelSelector, Marker, MarkerList, Recording};
use crate::stats;
use crate::template::{centred_templates, TemplateKind};

pub const ONSET_LABEL: &str = "GA_ONSET";

/// Largest super-period multiplier tried when grouping fractional periods.
const MAX_GROUPING: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    /// Channel name, or `"auto"` for the lead with the steepest transients.
    pub detection_channel: String,
    /// Multiple of the median absolute first difference.
    pub threshold_factor: f64,
    pub expected_period_s: Option<f64>,
    /// Odd, at least 3. Values larger than the run give a global template.
    pub window_reps: usize,
    /// Shift search (samples) when aligning each repetition to its template.
    pub align_search: usize,
    /// Channels to correct.
    pub channels: ChannelSelector,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            detection_channel: "auto".to_string(),
            threshold_factor: 10.0,
            expected_period_s: None,
            window_reps: 21,
            align_search: 2,
            channels: ChannelSelector::All,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_reps < 3 || self.window_reps % 2 == 0 {
            return Err(Error::InvalidParam(format!(
                "window_reps must be odd and >= 3, got {}",
                self.window_reps
            )));
        }
        if !(self.threshold_factor > 0.0) {
            return Err(Error::InvalidParam(format!(
                "threshold_factor must be positive, got {}",
                self.threshold_factor
            )));
        }
        if let Some(p) = self.expected_period_s {
            if !(p > 0.0) {
                return Err(Error::InvalidParam(format!("expected_period_s must be positive, got {p}")));
            }
        }
        Ok(())
    }
}

/// Channel with the largest 99th percentile absolute first difference.
pub fn auto_detection_channel(rec: &Recording) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for c in 0..rec.n_channels() {
        let x = rec.channel(c);
        let d: Vec<f64> = x.windows(2).into_iter().map(|w| (w[1] - w[0]).abs()).collect();
        let p = stats::percentile(&d, 99.0);
        if p > best.1 {
            best = (c, p);
        }
    }
    best.0
}

fn detection_index(rec: &Recording, params: &GaParams) -> Result<usize> {
    if params.detection_channel.eq_ignore_ascii_case("auto") {
        Ok(auto_detection_channel(rec))
    } else {
        rec.channel_index(&params.detection_channel).ok_or_else(|| {
            Error::EmptySelection(format!("no channel named {:?}", params.detection_channel))
        })
    }
}

/// Marks the first sample of every gradient artifact repetition.
pub fn detect_gradient_onsets(rec: &Recording, params: &GaParams) -> Result<MarkerList> {
    params.validate()?;
    let ch = detection_index(rec, params)?;
    let x = rec.channel(ch).to_vec();
    if x.len() < 2 {
        return Ok(MarkerList::new());
    }
    let diff: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let peak = diff.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(MarkerList::new());
    }
    let thresholds = local_thresholds(&diff, rec.rate_hz(), params.threshold_factor, peak);

    // First sample after each supra-threshold step, merged when crossings touch.
    let merge_gap = params.align_search + 1;
    let mut events: Vec<usize> = Vec::new();
    let mut last_crossing: Option<usize> = None;
    for (t, &d) in diff.iter().enumerate() {
        if d > thresholds[t / thresholds.block] {
            if last_crossing.is_none_or(|l| t - l > merge_gap) {
                events.push(t + 1);
            }
            last_crossing = Some(t);
        }
    }
    if events.len() < 2 {
        return Ok(MarkerList::from_samples(&events, ONSET_LABEL));
    }

    let rate = rec.rate_hz();
    let expected = params.expected_period_s.map(|p| p * rate);
    let raw_iv: Vec<f64> = events.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let raw_median = stats::median(&raw_iv);
    if let Some(p) = expected {
        if (raw_median - p).abs() > 0.1 * p {
            return Err(Error::PeriodMismatch {
                expected: p,
                detected: raw_median,
            });
        }
    }
    let first_guess = expected.unwrap_or(raw_median);

    // One event per repetition: drop events that come too soon after the
    // previously accepted one.
    let min_gap = first_guess - params.align_search as f64 - 0.5;
    let mut reps = vec![events[0]];
    for &e in &events[1..] {
        if (e - *reps.last().unwrap()) as f64 >= min_gap {
            reps.push(e);
        }
    }
    if reps.len() < 2 {
        return Ok(MarkerList::from_samples(&reps, ONSET_LABEL));
    }
    let intervals: Vec<f64> = reps.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let detected = stats::median(&intervals);

    // Fractional period: group every `m` events so the super-period is an
    // integer number of samples.
    let period = match expected {
        Some(p) => p,
        None => {
            let regular: Vec<f64> = intervals
                .iter()
                .copied()
                .filter(|iv| (iv - detected).abs() <= 0.1 * detected)
                .collect();
            stats::mean(&regular)
        }
    };
    let m = (1..=MAX_GROUPING)
        .find(|&m| {
            let p = m as f64 * period;
            (p - p.round()).abs() <= 0.05
        })
        .unwrap_or(1);

    let mut onsets = Vec::with_capacity(reps.len() / m + 1);
    let mut count = 0usize;
    for (i, &r) in reps.iter().enumerate() {
        if i > 0 && (r - reps[i - 1]) as f64 > 1.5 * period {
            // gap in the acquisition: restart the grouping phase
            count = 0;
        }
        if count % m == 0 {
            onsets.push(r);
        }
        count += 1;
    }
    Ok(MarkerList::from_unsorted(
        onsets.into_iter().map(|s| Marker::new(s, ONSET_LABEL)).collect(),
    ))
}

/// Threshold per one-second block of the first difference: `factor` times
/// the block median, floored at a twentieth of the recording-wide median so
/// unscanned stretches do not trigger on background activity. A zero median
/// (piecewise-constant signal) falls back to half the largest step.
struct Thresholds {
    block: usize,
    values: Vec<f64>,
}

impl std::ops::Index<usize> for Thresholds {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i.min(self.values.len() - 1)]
    }
}

fn local_thresholds(diff: &[f64], rate_hz: f64, factor: f64, peak: f64) -> Thresholds {
    let global = stats::median(diff);
    let block = (rate_hz.round() as usize).max(1);
    let mut values: Vec<f64> = diff
        .chunks(block)
        .map(|c| {
            let m = stats::median(c).max(global / 20.0);
            if m > 0.0 {
                factor * m
            } else {
                0.5 * peak
            }
        })
        .collect();
    // a short tail block shares its predecessor's estimate
    if values.len() > 1 && diff.len() % block != 0 && diff.len() % block < block / 2 {
        let n = values.len();
        values[n - 1] = values[n - 2];
    }
    Thresholds { block, values }
}

/// Per-channel artifact estimate that [`subtract_gradient_artifact`] removes.
/// Rows of channels outside `params.channels` are zero.
pub fn gradient_template_stream(
    rec: &Recording,
    onsets: &MarkerList,
    params: &GaParams,
) -> Result<Array2<f64>> {
    params.validate()?;
    let starts: Vec<usize> = onsets.samples();
    if starts.len() < 3 {
        return Err(Error::TooFewEvents {
            needed: 3,
            found: starts.len(),
        });
    }
    let intervals: Vec<usize> = starts.windows(2).map(|w| w[1] - w[0]).collect();
    let len = stats::median_usize(&intervals);
    let (min, max) = (
        *intervals.iter().min().unwrap(),
        *intervals.iter().max().unwrap(),
    );
    let tol = 0.1 * len as f64;
    if (len as f64 - min as f64) > tol || (max as f64 - len as f64) > tol {
        return Err(Error::IrregularRepetitions {
            median: len,
            min,
            max,
        });
    }
    let n = rec.n_samples();
    if starts.iter().any(|&s| s >= n) {
        return Err(Error::InvalidParam("onset beyond the end of the recording".into()));
    }

    let idx = params.channels.resolve(rec.channels())?;
    let rows: Vec<(usize, Vec<f64>)> = idx
        .par_iter()
        .map(|&c| {
            let x = rec.channel(c).to_vec();
            (c, channel_stream(&x, &starts, len, params))
        })
        .collect();
    let mut stream = Array2::zeros((rec.n_channels(), n));
    for (c, row) in rows {
        stream.row_mut(c).assign(&Array1::from(row));
    }
    Ok(stream)
}

fn channel_stream(x: &[f64], starts: &[usize], len: usize, params: &GaParams) -> Vec<f64> {
    let n = x.len();
    let mut stream = vec![0.0; n];
    centred_templates(x, starts, len, params.window_reps, TemplateKind::Mean, |r, template| {
        let shift = if params.align_search > 0 {
            best_shift(x, starts[r], template, params.align_search)
        } else {
            0
        };
        let at = (starts[r] as isize + shift) as usize;
        for (i, &t) in template.iter().enumerate() {
            if at + i >= n {
                break;
            }
            stream[at + i] = t;
        }
    });
    stream
}

/// Shift in `[-search, search]` that minimises the squared error between the
/// demeaned shifted segment and the template. Ties keep zero.
fn best_shift(x: &[f64], start: usize, template: &[f64], search: usize) -> isize {
    let len = template.len();
    let cost = |shift: isize| -> Option<f64> {
        let at = start as isize + shift;
        if at < 0 || at as usize + len > x.len() {
            return None;
        }
        let seg = &x[at as usize..at as usize + len];
        let m = stats::mean(seg);
        Some(seg.iter().zip(template).map(|(v, t)| (v - m - t).powi(2)).sum())
    };
    let Some(mut best_cost) = cost(0) else {
        return 0;
    };
    let mut best = 0isize;
    for s in 1..=search as isize {
        for shift in [-s, s] {
            if let Some(c) = cost(shift) {
                if c < best_cost * (1.0 - 1e-12) {
                    best_cost = c;
                    best = shift;
                }
            }
        }
    }
    best
}

/// Removes the gradient artifact from the selected channels.
pub fn subtract_gradient_artifact(
    rec: &Recording,
    onsets: &MarkerList,
    params: &GaParams,
) -> Result<Recording> {
    let stream = gradient_template_stream(rec, onsets, params)?;
    rec.with_data(rec.data() - &stream)
}

/// Median inter-onset interval in samples.
pub fn repetition_length(onsets: &MarkerList) -> Option<usize> {
    let s = onsets.samples();
    if s.len() < 2 {
        return None;
    }
    let iv: Vec<usize> = s.windows(2).map(|w| w[1] - w[0]).collect();
    Some(stats::median_usize(&iv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{ChannelInfo, Modality};

    fn rec_from(rows: Vec<Vec<f64>>) -> Recording {
        let n = rows[0].len();
        let channels = (0..rows.len())
            .map(|i| ChannelInfo::new(format!("E{i}"), Modality::Eeg))
            .collect();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let data = Array2::from_shape_vec((flat.len() / n, n), flat).unwrap();
        Recording::new(5000.0, channels, data, MarkerList::new()).unwrap()
    }

    // zero-mean sawtooth with a falling ramp and a jump at the onset
    fn sawtooth(period: usize, amp: f64, offset: usize, n: usize) -> Vec<f64> {
        (0..n)
            .map(|t| {
                if t < offset {
                    0.0
                } else {
                    let p = ((t - offset) % period) as f64;
                    amp * (1.0 - 2.0 * (p + 0.5) / period as f64)
                }
            })
            .collect()
    }

    fn quiet(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed | 1;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 4.0
            })
            .collect()
    }

    #[test]
    fn strong_amplitude_drift_keeps_early_onsets() {
        // amplitude grows thirty-fold; the early jumps sit below ten
        // times the recording-wide median step
        let n = 150_000;
        let bg = quiet(n, 9);
        let saw = sawtooth(101, 1.0, 0, n);
        let x: Vec<f64> = (0..n)
            .map(|t| bg[t] + 500.0 * (1.0 + 0.02 * (t / 101) as f64) * saw[t])
            .collect();
        let onsets = detect_gradient_onsets(&rec_from(vec![x]), &GaParams::default()).unwrap();
        let planted: Vec<usize> = (1..n / 101 + 1).map(|k| 101 * k).filter(|&s| s < n).collect();
        assert_eq!(onsets.samples(), planted);
    }

    #[test]
    fn all_zero_gives_no_onsets() {
        let rec = rec_from(vec![vec![0.0; 1000]]);
        assert!(detect_gradient_onsets(&rec, &GaParams::default()).unwrap().is_empty());
    }

    #[test]
    fn sawtooth_onsets_are_recovered() {
        let n = 5000;
        let offset = 17;
        let bg = quiet(n, 3);
        let art = sawtooth(50, 5000.0, offset, n);
        let x: Vec<f64> = bg.iter().zip(&art).map(|(a, b)| a + b).collect();
        let rec = rec_from(vec![x]);
        let onsets = detect_gradient_onsets(&rec, &GaParams::default()).unwrap();
        let planted: Vec<usize> = (0..).map(|k| offset + 50 * k).take_while(|&s| s < n).collect();
        // the first repetition has no preceding jump to detect
        let found = onsets.samples();
        assert!(found.len() >= planted.len() - 1);
        for s in &found {
            assert!(planted.iter().any(|p| (*p as i64 - *s as i64).abs() <= 2), "{s}");
        }
        assert!(onsets.iter().all(|m| m.label == ONSET_LABEL));
    }

    #[test]
    fn expected_period_mismatch_is_an_error() {
        let n = 3000;
        let x = sawtooth(50, 5000.0, 0, n);
        let rec = rec_from(vec![x]);
        let params = GaParams {
            expected_period_s: Some(0.02), // 100 samples
            ..GaParams::default()
        };
        assert!(matches!(
            detect_gradient_onsets(&rec, &params),
            Err(Error::PeriodMismatch { .. })
        ));
        let ok = GaParams {
            expected_period_s: Some(0.01),
            ..GaParams::default()
        };
        assert!(!detect_gradient_onsets(&rec, &ok).unwrap().is_empty());
    }

    #[test]
    fn fractional_tr_groups_into_integer_super_period() {
        // TR of 5.05 ms at 5 kHz is 25.25 samples; four TRs span 101 samples.
        let n = 20_000;
        let mut x = quiet(n, 9);
        let mut k = 0;
        loop {
            let s = (k as f64 * 25.25).round() as usize + 10;
            if s + 20 >= n {
                break;
            }
            for i in 0..20 {
                x[s + i] += 3000.0 * (1.0 - i as f64 / 20.0);
            }
            k += 1;
        }
        let rec = rec_from(vec![x]);
        let params = GaParams {
            expected_period_s: Some(crate::signal::MRI_TR_S),
            ..GaParams::default()
        };
        let onsets = detect_gradient_onsets(&rec, &params).unwrap();
        let iv: Vec<usize> = onsets.samples().windows(2).map(|w| w[1] - w[0]).collect();
        assert!(!iv.is_empty());
        assert!(iv.iter().all(|&d| d == 101), "{iv:?}");
        // without the hint the period is estimated from the data
        let free = detect_gradient_onsets(&rec, &GaParams::default()).unwrap();
        let iv: Vec<usize> = free.samples().windows(2).map(|w| w[1] - w[0]).collect();
        assert!(iv.iter().all(|&d| d == 101), "{iv:?}");
    }

    #[test]
    fn detection_is_translation_covariant() {
        let n = 6000;
        let bg = quiet(n + 37, 5);
        let art = sawtooth(60, 4000.0, 100, n);
        let x: Vec<f64> = (0..n).map(|t| bg[t + 37] + art[t]).collect();
        let mut shifted = bg[..37].to_vec();
        shifted.extend_from_slice(&x);
        let a = detect_gradient_onsets(&rec_from(vec![x]), &GaParams::default()).unwrap();
        let b = detect_gradient_onsets(&rec_from(vec![shifted]), &GaParams::default()).unwrap();
        assert_eq!(a.shifted(37).unwrap(), b);
    }

    #[test]
    fn auto_picks_steepest_channel() {
        let n = 2000;
        let weak = sawtooth(50, 10.0, 0, n);
        let strong = sawtooth(50, 1000.0, 0, n);
        let rec = rec_from(vec![weak, strong]);
        assert_eq!(auto_detection_channel(&rec), 1);
    }

    #[test]
    fn identical_repetitions_cancel_exactly() {
        let n = 50 * 60;
        let x = sawtooth(50, 5000.0, 0, n);
        let rec = rec_from(vec![x.clone()]);
        let onsets = MarkerList::from_samples(&(0..60).map(|k| k * 50).collect::<Vec<_>>(), ONSET_LABEL);
        let out = subtract_gradient_artifact(&rec, &onsets, &GaParams::default()).unwrap();
        let art_rms = stats::rms(&x);
        let resid = stats::rms(&out.channel(0).to_vec()[500..2500]);
        assert!(resid <= 1e-6 * art_rms, "{resid}");
    }

    #[test]
    fn too_few_onsets_and_irregular_runs_error() {
        let rec = rec_from(vec![vec![1.0; 400]]);
        let two = MarkerList::from_samples(&[0, 50], ONSET_LABEL);
        assert!(matches!(
            subtract_gradient_artifact(&rec, &two, &GaParams::default()),
            Err(Error::TooFewEvents { .. })
        ));
        let irregular = MarkerList::from_samples(&[0, 50, 100, 170, 220], ONSET_LABEL);
        assert!(matches!(
            subtract_gradient_artifact(&rec, &irregular, &GaParams::default()),
            Err(Error::IrregularRepetitions { .. })
        ));
    }

    #[test]
    fn params_are_validated() {
        let even = GaParams {
            window_reps: 20,
            ..GaParams::default()
        };
        assert!(even.validate().is_err());
        let neg = GaParams {
            threshold_factor: 0.0,
            ..GaParams::default()
        };
        assert!(neg.validate().is_err());
        assert!(GaParams::default().validate().is_ok());
    }

    #[test]
    fn samples_outside_repetitions_are_untouched() {
        let n = 4000;
        let bg = quiet(n, 11);
        let art = sawtooth(50, 2000.0, 1000, 3000);
        let x: Vec<f64> = (0..n)
            .map(|t| bg[t] + if t < 3000 { art[t] } else { 0.0 })
            .collect();
        let rec = rec_from(vec![x.clone()]);
        let onsets = MarkerList::from_samples(&(0..40).map(|k| 1000 + k * 50).collect::<Vec<_>>(), ONSET_LABEL);
        let out = subtract_gradient_artifact(&rec, &onsets, &GaParams::default()).unwrap();
        for t in (0..1000).chain(3000..n) {
            assert_eq!(out.data()[[0, t]], x[t]);
        }
    }
}
