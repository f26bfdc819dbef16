//! Ground-truth EEG: correlated AR(1) background plus a stimulus-locked ERP.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::protocol::{Protocol, STIM_PREFIX};
use crate::error::{Error, Result};
use crate::signal::{standard_montage, ChannelInfo, Modality, Recording};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErpConfig {
    pub peak_uv: f64,
    pub freq_hz: f64,
    pub duration_s: f64,
    pub decay_s: f64,
    /// Onset of the response after the STIM marker.
    pub latency_s: f64,
    /// One gain per EEG channel.
    pub gains: Vec<f64>,
}

impl Default for ErpConfig {
    fn default() -> Self {
        ErpConfig {
            peak_uv: 15.0,
            freq_hz: 5.0,
            duration_s: 0.4,
            decay_s: 0.12,
            latency_s: 0.1,
            // C3 C4 F3 F4 FPz O1 O2 M1 M2, left-lateralized
            gains: vec![1.0, 0.45, 0.9, 0.4, 0.6, 0.3, 0.2, 0.15, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanEegConfig {
    pub background_rms_uv: f64,
    pub ar_coeff: f64,
    /// Shared latent AR sources mixed across channels.
    pub n_latent: usize,
    /// Share of each channel's background power that is channel-specific.
    pub independent_fraction: f64,
    /// Background power carried by ongoing activity of the ERP generator,
    /// as a share of the strongest ERP channel's power; other channels get
    /// it in proportion to their squared ERP gain.
    pub erp_source_share: f64,
    pub erp: ErpConfig,
}

impl Default for CleanEegConfig {
    fn default() -> Self {
        CleanEegConfig {
            background_rms_uv: 10.0,
            ar_coeff: 0.98,
            n_latent: 3,
            independent_fraction: 0.05,
            erp_source_share: 0.3,
            erp: ErpConfig::default(),
        }
    }
}

impl CleanEegConfig {
    pub fn validate(&self, n_eeg: usize) -> Result<()> {
        if !(self.background_rms_uv >= 0.0) {
            return Err(Error::InvalidParam("background_rms_uv must be >= 0".into()));
        }
        if !(self.ar_coeff > -1.0 && self.ar_coeff < 1.0) {
            return Err(Error::InvalidParam("ar_coeff must lie in (-1, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.independent_fraction) || (self.n_latent == 0 && self.independent_fraction < 1.0) {
            return Err(Error::InvalidParam(
                "independent_fraction must lie in [0, 1] and be 1 without latent sources".into(),
            ));
        }
        if !(0.0..=1.0 - self.independent_fraction).contains(&self.erp_source_share) {
            return Err(Error::InvalidParam(
                "erp_source_share must lie in [0, 1 - independent_fraction]".into(),
            ));
        }
        if self.erp.gains.len() != n_eeg {
            return Err(Error::InvalidParam(format!(
                "{} ERP gains for {n_eeg} EEG channels",
                self.erp.gains.len()
            )));
        }
        if !(self.erp.duration_s > 0.0 && self.erp.decay_s > 0.0 && self.erp.latency_s >= 0.0) {
            return Err(Error::InvalidParam("ERP timing must be positive".into()));
        }
        Ok(())
    }
}

/// Damped sinusoid scaled so its largest absolute value is `peak_uv`.
pub fn erp_template(cfg: &ErpConfig, rate_hz: f64) -> Vec<f64> {
    let n = (cfg.duration_s * rate_hz).round() as usize;
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate_hz;
            (2.0 * PI * cfg.freq_hz * t).sin() * (-t / cfg.decay_s).exp()
        })
        .collect();
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return raw;
    }
    raw.into_iter().map(|v| v * cfg.peak_uv / peak).collect()
}

pub(crate) fn eeg_channels() -> Vec<ChannelInfo> {
    standard_montage()
        .into_iter()
        .filter(|c| c.modality == Modality::Eeg)
        .collect()
}

/// Unit-variance AR(1) series.
pub(crate) fn ar1(rng: &mut ChaCha8Rng, n: usize, phi: f64) -> Vec<f64> {
    let innov = (1.0 - phi * phi).sqrt();
    let mut x: f64 = rng.sample(StandardNormal);
    (0..n)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            x = phi * x + innov * e;
            x
        })
        .collect()
}

/// EEG channels of the standard montage carrying the protocol markers.
pub fn synth_clean_eeg(protocol: &Protocol, rate_hz: f64, cfg: &CleanEegConfig, seed: u64) -> Result<Recording> {
    let channels = eeg_channels();
    let p = channels.len();
    cfg.validate(p)?;
    let n = protocol.n_samples;
    let mut data = Array2::zeros((p, n));

    if cfg.background_rms_uv > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latent: Vec<Vec<f64>> = (0..cfg.n_latent).map(|_| ar1(&mut rng, n, cfg.ar_coeff)).collect();
        let generator = if cfg.erp_source_share > 0.0 {
            ar1(&mut rng, n, cfg.ar_coeff)
        } else {
            Vec::new()
        };
        let gmax = cfg.erp.gains.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for c in 0..p {
            let erp_share = if gmax > 0.0 && !generator.is_empty() {
                cfg.erp_source_share * (cfg.erp.gains[c] / gmax).powi(2)
            } else {
                0.0
            };
            let shared = 1.0 - cfg.independent_fraction - erp_share;
            // random direction in latent space carrying the shared power
            let mut g: Vec<f64> = (0..cfg.n_latent).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            for v in g.iter_mut() {
                *v *= shared.sqrt() / norm;
            }
            let own = ar1(&mut rng, n, cfg.ar_coeff);
            let ind = cfg.independent_fraction.sqrt();
            let gen_gain = erp_share.sqrt() * cfg.erp.gains[c].signum();
            let mut row = data.row_mut(c);
            for j in 0..n {
                let mut v = ind * own[j];
                for (l, gl) in g.iter().enumerate() {
                    v += gl * latent[l][j];
                }
                if erp_share > 0.0 {
                    v += gen_gain * generator[j];
                }
                row[j] = cfg.background_rms_uv * v;
            }
        }
    }

    let template = erp_template(&cfg.erp, rate_hz);
    let lag = (cfg.erp.latency_s * rate_hz).round() as usize;
    for m in protocol.markers.with_label(&format!("{STIM_PREFIX}*")).iter() {
        let start = m.sample + lag;
        for (c, gain) in cfg.erp.gains.iter().enumerate() {
            let mut row = data.row_mut(c);
            for (i, t) in template.iter().enumerate() {
                if start + i >= n {
                    break;
                }
                row[start + i] += gain * t;
            }
        }
    }
    Recording::new(rate_hz, channels, data, protocol.markers.clone())
}
