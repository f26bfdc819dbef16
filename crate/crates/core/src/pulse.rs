//! R-peak detection and ballistocardiogram (pulse) artifact subtraction.

use std::fmt;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Butterworth, ChannelSelector, Marker, MarkerList, Modality, Recording};
use crate::stats;
use crate::template::{centred_templates, TemplateKind};

pub const R_PEAK_LABEL: &str = "R_PEAK";

/// Low-pass applied to the ECG before peak picking.
pub const ECG_LOWPASS_HZ: f64 = 15.0;
pub const REFRACTORY_S: f64 = 0.3;
pub const THRESHOLD_FRACTION: f64 = 0.6;
pub const THRESHOLD_PERCENTILE: f64 = 98.0;
pub const THRESHOLD_WINDOW_S: f64 = 10.0;
/// Relative RR deviation from the running median that marks a beat suspect.
pub const RR_TOLERANCE: f64 = 0.25;
const RR_MEDIAN_SPAN: usize = 9;
const LOW_AMPLITUDE_FRACTION: f64 = 0.5;
const MIN_DURATION_S: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SuspectReason {
    RrTooShort,
    RrTooLong,
    LowAmplitude,
}

impl fmt::Display for SuspectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuspectReason::RrTooShort => "RR_TOO_SHORT",
            SuspectReason::RrTooLong => "RR_TOO_LONG",
            SuspectReason::LowAmplitude => "LOW_AMPLITUDE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suspect {
    /// Index into `RPeakReport::peaks`.
    pub peak: usize,
    pub reason: SuspectReason,
}

/// Automated half of the semi-automatic R-peak review. The manual half is an
/// edited `markers.csv` passed back to [`subtract_pulse_artifact`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RPeakReport {
    pub peaks: MarkerList,
    pub rr_median_s: f64,
    pub suspects: Vec<Suspect>,
}

impl RPeakReport {
    pub fn suspects_for(&self, peak: usize) -> impl Iterator<Item = SuspectReason> + '_ {
        self.suspects.iter().filter(move |s| s.peak == peak).map(|s| s.reason)
    }

    /// Rows `peak_index,sample,reason`.
    pub fn suspect_rows(&self) -> Vec<Vec<String>> {
        let samples = self.peaks.samples();
        self.suspects
            .iter()
            .map(|s| vec![s.peak.to_string(), samples[s.peak].to_string(), s.reason.to_string()])
            .collect()
    }
}

fn ecg_index(rec: &Recording) -> Result<usize> {
    let ecg: Vec<usize> = rec
        .channels()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.modality == Modality::Ecg)
        .map(|(i, _)| i)
        .collect();
    match ecg.as_slice() {
        [] => Err(Error::EmptySelection("no ECG channel".into())),
        [i] => Ok(*i),
        _ => Err(Error::InvalidParam(format!("expected one ECG channel, found {}", ecg.len()))),
    }
}

/// Low-passes the ECG at 15 Hz and picks local maxima above 0.6 × the running
/// 98th percentile (10 s window), with a 0.3 s refractory period.
pub fn detect_r_peaks(rec: &Recording) -> Result<RPeakReport> {
    let ch = ecg_index(rec)?;
    let rate = rec.rate_hz();
    if rec.duration_s() < MIN_DURATION_S {
        return Err(Error::InvalidParam(format!(
            "ECG too short for peak detection: {:.2} s < {MIN_DURATION_S} s",
            rec.duration_s()
        )));
    }
    let filt = Butterworth::lowpass(4, ECG_LOWPASS_HZ, rate)?;
    let y = filt.filtfilt(&rec.channel(ch).to_vec());
    let n = y.len();

    // threshold evaluated once per second over a centred 10 s window
    let block = rate.round() as usize;
    let half_win = (THRESHOLD_WINDOW_S * rate / 2.0).round() as usize;
    let thresholds: Vec<f64> = (0..n.div_ceil(block))
        .map(|b| {
            let centre = b * block + block / 2;
            let lo = centre.saturating_sub(half_win);
            let hi = (centre + half_win).min(n);
            THRESHOLD_FRACTION * stats::percentile(&y[lo..hi], THRESHOLD_PERCENTILE)
        })
        .collect();

    let refractory = (REFRACTORY_S * rate).round() as usize;
    let mut peaks: Vec<usize> = Vec::new();
    for t in 1..n.saturating_sub(1) {
        let v = y[t];
        if v <= thresholds[t / block] || v < y[t - 1] || v <= y[t + 1] {
            continue;
        }
        match peaks.last_mut() {
            Some(last) if t - *last < refractory => {
                if v > y[*last] {
                    *last = t;
                }
            }
            _ => peaks.push(t),
        }
    }
    if peaks.is_empty() {
        return Err(Error::NoPeaks);
    }

    let rr: Vec<usize> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    let rr_median = if rr.is_empty() {
        0.0
    } else {
        stats::median_usize(&rr) as f64
    };
    let mut suspects = Vec::new();
    for (i, &r) in rr.iter().enumerate() {
        let lo = i.saturating_sub(RR_MEDIAN_SPAN / 2);
        let hi = (i + RR_MEDIAN_SPAN / 2 + 1).min(rr.len());
        let local: Vec<f64> = rr[lo..hi].iter().map(|&v| v as f64).collect();
        let med = stats::median(&local);
        let peak = i + 1;
        if r as f64 > (1.0 + RR_TOLERANCE) * med {
            suspects.push(Suspect {
                peak,
                reason: SuspectReason::RrTooLong,
            });
        } else if (r as f64) < (1.0 - RR_TOLERANCE) * med {
            suspects.push(Suspect {
                peak,
                reason: SuspectReason::RrTooShort,
            });
        }
    }
    let amps: Vec<f64> = peaks.iter().map(|&p| y[p]).collect();
    let amp_median = stats::median(&amps);
    for (i, &a) in amps.iter().enumerate() {
        if a < LOW_AMPLITUDE_FRACTION * amp_median {
            suspects.push(Suspect {
                peak: i,
                reason: SuspectReason::LowAmplitude,
            });
        }
    }
    suspects.sort_by_key(|s| s.peak);

    Ok(RPeakReport {
        peaks: MarkerList::from_unsorted(peaks.iter().map(|&p| Marker::new(p, R_PEAK_LABEL)).collect()),
        rr_median_s: if rr_median > 0.0 { rr_median / rate } else { f64::NAN },
        suspects,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcgParams {
    /// Artifact lag after the R-peak.
    pub delay_s: f64,
    /// Segment length as a fraction of the median RR interval, in (0, 1.5].
    pub span_fraction: f64,
    /// Odd, at least 3.
    pub window_beats: usize,
    pub template: TemplateKind,
    /// Channels to correct; ECG channels are always skipped.
    pub channels: ChannelSelector,
}

impl Default for BcgParams {
    fn default() -> Self {
        BcgParams {
            delay_s: 0.21,
            span_fraction: 1.0,
            window_beats: 21,
            template: TemplateKind::Mean,
            channels: ChannelSelector::Modality(Modality::Eeg),
        }
    }
}

impl BcgParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delay_s >= 0.0 && self.delay_s.is_finite()) {
            return Err(Error::InvalidParam(format!("delay_s must be >= 0, got {}", self.delay_s)));
        }
        if !(self.span_fraction > 0.0 && self.span_fraction <= 1.5) {
            return Err(Error::InvalidParam(format!(
                "span_fraction must lie in (0, 1.5], got {}",
                self.span_fraction
            )));
        }
        if self.window_beats < 3 || self.window_beats % 2 == 0 {
            return Err(Error::InvalidParam(format!(
                "window_beats must be odd and >= 3, got {}",
                self.window_beats
            )));
        }
        Ok(())
    }
}

/// Cardiac-locked artifact estimate removed by [`subtract_pulse_artifact`].
pub fn pulse_template_stream(
    rec: &Recording,
    peaks: &MarkerList,
    params: &BcgParams,
) -> Result<Array2<f64>> {
    params.validate()?;
    let p = peaks.samples();
    if p.len() < 3 {
        return Err(Error::TooFewEvents {
            needed: 3,
            found: p.len(),
        });
    }
    let rr: Vec<usize> = p.windows(2).map(|w| w[1] - w[0]).collect();
    let rr_median = stats::median_usize(&rr) as f64;
    let span = (params.span_fraction * rr_median).round() as usize;
    if span as f64 > 1.5 * rr_median || span == 0 {
        return Err(Error::InvalidParam(format!(
            "segment span {span} samples exceeds 1.5 x median RR ({rr_median})"
        )));
    }
    let delay = (params.delay_s * rec.rate_hz()).round() as usize;
    let n = rec.n_samples();
    let starts: Vec<usize> = p.iter().map(|&s| s + delay).take_while(|&s| s < n).collect();
    if starts.len() < 3 {
        return Err(Error::TooFewEvents {
            needed: 3,
            found: starts.len(),
        });
    }
    // each segment stops where the next one begins
    let ends: Vec<usize> = (0..starts.len())
        .map(|b| {
            let mut e = (starts[b] + span).min(n);
            if let Some(&next) = starts.get(b + 1) {
                e = e.min(next);
            }
            e
        })
        .collect();

    let idx: Vec<usize> = params
        .channels
        .resolve(rec.channels())?
        .into_iter()
        .filter(|&c| rec.channels()[c].modality != Modality::Ecg)
        .collect();
    let rows: Vec<(usize, Vec<f64>)> = idx
        .par_iter()
        .map(|&c| {
            let x = rec.channel(c).to_vec();
            let mut stream = vec![0.0; n];
            centred_templates(&x, &starts, span, params.window_beats, params.template, |b, t| {
                let len = ends[b] - starts[b];
                stream[starts[b]..ends[b]].copy_from_slice(&t[..len]);
            });
            (c, stream)
        })
        .collect();
    let mut out = Array2::zeros((rec.n_channels(), n));
    for (c, row) in rows {
        out.row_mut(c).assign(&Array1::from(row));
    }
    Ok(out)
}

pub fn subtract_pulse_artifact(
    rec: &Recording,
    peaks: &MarkerList,
    params: &BcgParams,
) -> Result<Recording> {
    let stream = pulse_template_stream(rec, peaks, params)?;
    rec.with_data(rec.data() - &stream)
}
