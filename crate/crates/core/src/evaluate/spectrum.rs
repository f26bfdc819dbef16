//! Averaged-segment magnitude spectra and harmonic band power.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Window {
    #[default]
    Hann,
}

/// One-sided magnitude spectrum scaled so a unit-amplitude sinusoid centred
/// on a bin reads 1.0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub window: Window,
    pub n_fft: usize,
    pub segments: usize,
}

/// Equivalent noise bandwidth of the periodic Hann window, in bins.
const HANN_ENBW: f64 = 1.5;

impl Spectrum {
    pub fn bin_width_hz(&self) -> f64 {
        if self.freqs_hz.len() > 1 {
            self.freqs_hz[1]
        } else {
            0.0
        }
    }

    /// Mean-square power of the analysed signal (Parseval).
    pub fn total_power(&self) -> f64 {
        let last = self.magnitude.len() - 1;
        let nyquist_bin = self.n_fft % 2 == 0;
        let mut sum = 0.0;
        for (k, m) in self.magnitude.iter().enumerate() {
            // edge bins are not doubled in the one-sided scale
            if k == 0 || (nyquist_bin && k == last) {
                sum += m * m;
            } else {
                sum += m * m / 2.0;
            }
        }
        sum / HANN_ENBW
    }

    pub fn bin_of(&self, freq_hz: f64) -> usize {
        (freq_hz / self.bin_width_hz()).round() as usize
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Hann-windowed, 50%-overlap averaged spectrum of `x`.
pub fn magnitude_spectrum(x: &[f64], rate_hz: f64, n_fft: usize) -> Result<Spectrum> {
    if n_fft < 16 {
        return Err(Error::InvalidParam(format!("n_fft must be >= 16, got {n_fft}")));
    }
    if x.len() < n_fft {
        return Err(Error::InvalidParam(format!(
            "series of {} samples is shorter than n_fft {n_fft}",
            x.len()
        )));
    }
    let w = hann(n_fft);
    let wsum: f64 = w.iter().sum();
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let n_bins = n_fft / 2 + 1;
    let mut power = vec![0.0; n_bins];
    let hop = (n_fft / 2).max(1);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut segments = 0;
    let mut start = 0;
    while start + n_fft <= x.len() {
        for ((b, &v), &wv) in buf.iter_mut().zip(&x[start..start + n_fft]).zip(&w) {
            *b = Complex::new(v * wv, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let nyquist_bin = n_fft % 2 == 0;
    let magnitude = power
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let edge = k == 0 || (nyquist_bin && k == n_bins - 1);
            let gain = if edge { 1.0 } else { 2.0 };
            gain * (p / segments as f64).sqrt() / wsum
        })
        .collect();
    let df = rate_hz / n_fft as f64;
    Ok(Spectrum {
        freqs_hz: (0..n_bins).map(|k| k as f64 * df).collect(),
        magnitude,
        window: Window::Hann,
        n_fft,
        segments,
    })
}

/// Sum of squared magnitudes over the ±1-bin bands at `k·f0`, k = 1..=n.
pub fn harmonic_power(spec: &Spectrum, f0_hz: f64, n_harmonics: usize) -> Result<f64> {
    if !(f0_hz > 0.0) || n_harmonics == 0 {
        return Err(Error::InvalidParam("harmonic_power needs f0 > 0 and n >= 1".into()));
    }
    let nyquist = *spec.freqs_hz.last().unwrap_or(&0.0);
    if n_harmonics as f64 * f0_hz >= nyquist {
        return Err(Error::InvalidParam(format!(
            "{n_harmonics} harmonics of {f0_hz} Hz reach the Nyquist frequency"
        )));
    }
    let last = spec.magnitude.len() - 1;
    let mut total = 0.0;
    for k in 1..=n_harmonics {
        let c = spec.bin_of(k as f64 * f0_hz);
        if c == 0 || c + 1 > last {
            return Err(Error::InvalidParam(format!("harmonic {k} band is out of range")));
        }
        total += spec.magnitude[c - 1..=c + 1].iter().map(|m| m * m).sum::<f64>();
    }
    Ok(total)
}

/// Harmonics of `f0_hz` that fit below Nyquist with their ±1-bin band.
pub fn max_harmonics(f0_hz: f64, rate_hz: f64, n_fft: usize) -> usize {
    let df = rate_hz / n_fft as f64;
    let nyquist = rate_hz / 2.0;
    let mut n = 0;
    while ((n + 1) as f64) * f0_hz + df < nyquist {
        n += 1;
    }
    n
}
