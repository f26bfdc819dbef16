//! Recursive Butterworth filters as cascaded biquads, with zero-phase
//! forward-backward application.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::recording::{ChannelSelector, Recording};
use crate::error::{Error, Result};

/// Order used for the zero-phase low-pass stage.
pub const DEFAULT_ORDER: usize = 4;

/// Normalized second-order section (`a0 == 1`), transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn normalized(b: [f64; 3], a: [f64; 3]) -> Self {
        Biquad {
            b0: b[0] / a[0],
            b1: b[1] / a[0],
            b2: b[2] / a[0],
            a1: a[1] / a[0],
            a2: a[2] / a[0],
        }
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// State that makes a constant input `x` produce a constant output.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let y = self.dc_gain() * x;
        [
            (self.b1 + self.b2) * x - (self.a1 + self.a2) * y,
            self.b2 * x - self.a2 * y,
        ]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b0 * input + z[0];
            z[0] = self.b1 * input - self.a1 * y + z[1];
            z[1] = self.b2 * input - self.a2 * y;
            *v = y;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Low,
    High,
}

/// Digital Butterworth filter (bilinear transform, prewarped at the cutoff).
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    sections: Vec<Biquad>,
    order: usize,
}

impl Butterworth {
    pub fn lowpass(order: usize, cutoff_hz: f64, rate_hz: f64) -> Result<Self> {
        Self::design(Kind::Low, order, cutoff_hz, rate_hz)
    }

    pub fn highpass(order: usize, cutoff_hz: f64, rate_hz: f64) -> Result<Self> {
        Self::design(Kind::High, order, cutoff_hz, rate_hz)
    }

    /// High-pass at `low_hz` cascaded with low-pass at `high_hz`.
    pub fn bandpass(order: usize, low_hz: f64, high_hz: f64, rate_hz: f64) -> Result<Self> {
        if low_hz >= high_hz {
            return Err(Error::InvalidParam(format!(
                "band edges out of order: {low_hz} >= {high_hz}"
            )));
        }
        let mut hp = Self::highpass(order, low_hz, rate_hz)?;
        let lp = Self::lowpass(order, high_hz, rate_hz)?;
        hp.sections.extend(lp.sections);
        hp.order += lp.order;
        Ok(hp)
    }

    fn design(kind: Kind, order: usize, cutoff_hz: f64, rate_hz: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParam("filter order must be positive".into()));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < rate_hz / 2.0) {
            return Err(Error::InvalidParam(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, Nyquist = {} Hz)",
                rate_hz / 2.0
            )));
        }
        let w0 = 2.0 * PI * cutoff_hz / rate_hz;
        let (sin, cos) = w0.sin_cos();
        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for k in 0..order / 2 {
            let q = 1.0 / (2.0 * ((2 * k + 1) as f64 * PI / (2 * order) as f64).sin());
            let alpha = sin / (2.0 * q);
            let a = [1.0 + alpha, -2.0 * cos, 1.0 - alpha];
            let b = match kind {
                Kind::Low => [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0],
                Kind::High => [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0],
            };
            sections.push(Biquad::normalized(b, a));
        }
        if order % 2 == 1 {
            let k = (PI * cutoff_hz / rate_hz).tan();
            let a = [1.0 + k, k - 1.0, 0.0];
            let b = match kind {
                Kind::Low => [k, k, 0.0],
                Kind::High => [1.0, -1.0, 0.0],
            };
            sections.push(Biquad::normalized(b, a));
        }
        Ok(Butterworth { sections, order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Causal single pass from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y, [0.0; 2]);
        }
        y
    }

    fn filter_steady(&self, y: &mut [f64]) {
        if y.is_empty() {
            return;
        }
        let mut x0 = y[0];
        for s in &self.sections {
            let z = s.steady_state(x0);
            x0 *= s.dc_gain();
            s.run(y, z);
        }
    }

    /// Zero-phase forward-backward application. Edges are extended by odd
    /// reflection over `3 × order` samples and each pass starts in the
    /// steady state of its first sample.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * self.order).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        self.filter_steady(&mut ext);
        ext.reverse();
        self.filter_steady(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase order-4 low-pass on the selected channels; other channels pass
/// through untouched.
pub fn lowpass(rec: &Recording, cutoff_hz: f64, selector: &ChannelSelector) -> Result<Recording> {
    let filt = Butterworth::lowpass(DEFAULT_ORDER, cutoff_hz, rec.rate_hz())?;
    apply_zero_phase(rec, &filt, selector)
}

pub fn apply_zero_phase(
    rec: &Recording,
    filt: &Butterworth,
    selector: &ChannelSelector,
) -> Result<Recording> {
    let idx = selector.resolve(rec.channels())?;
    let rows: Vec<(usize, Vec<f64>)> = idx
        .par_iter()
        .map(|&i| (i, filt.filtfilt(&rec.channel(i).to_vec())))
        .collect();
    let mut data = rec.data().clone();
    for (i, row) in rows {
        data.row_mut(i).assign(&ndarray::Array1::from(row));
    }
    rec.with_data(data)
}
