//! Canonical correlation analysis of EEG against EMG/EOG reference leads and
//! removal of the shared components.
//!
//! Both blocks are centred, their covariances ridge-regularised and whitened,
//! and the whitened cross-covariance is decomposed by SVD. Singular values are
//! the canonical correlations ρ; components with ρ above the threshold are
//! projected out of the EEG with their least-squares mixing patterns.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Recording;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CcaParams {
    /// Components with ρ strictly above this are rejected.
    pub rho_threshold: f64,
    /// Covariance regulariser, relative to the mean covariance diagonal.
    pub ridge: f64,
    pub max_reject: Option<usize>,
    /// Non-overlapping per-window decomposition instead of one for the whole
    /// segment.
    pub window_s: Option<f64>,
}

impl Default for CcaParams {
    fn default() -> Self {
        CcaParams {
            rho_threshold: 0.4,
            ridge: 1e-8,
            max_reject: None,
            window_s: None,
        }
    }
}

impl CcaParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho_threshold) {
            return Err(Error::InvalidParam(format!(
                "rho_threshold must lie in [0, 1], got {}",
                self.rho_threshold
            )));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidParam(format!("ridge must be >= 0, got {}", self.ridge)));
        }
        if let Some(w) = self.window_s {
            if !(w > 0.0) {
                return Err(Error::InvalidParam(format!("window_s must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcaResult {
    /// ρ per component, descending.
    pub correlations: Vec<f64>,
    /// n_eeg × K; component time courses are `Wᵀ (X - means)`.
    pub eeg_weights: DMatrix<f64>,
    /// n_ref × K.
    pub ref_weights: DMatrix<f64>,
    /// n_eeg × K least-squares patterns, `X - means ≈ A U`.
    pub eeg_mixing: DMatrix<f64>,
    pub eeg_means: Vec<f64>,
    pub ref_means: Vec<f64>,
}

impl CcaResult {
    pub fn n_components(&self) -> usize {
        self.correlations.len()
    }

    /// Canonical variates of an EEG block (K × n).
    pub fn eeg_components(&self, eeg: &Recording) -> Result<DMatrix<f64>> {
        let x = centred(eeg.data(), &self.eeg_means)?;
        Ok(self.eeg_weights.transpose() * x)
    }

    pub fn ref_components(&self, refs: &Recording) -> Result<DMatrix<f64>> {
        let y = centred(refs.data(), &self.ref_means)?;
        Ok(self.ref_weights.transpose() * y)
    }
}

fn centred(data: &Array2<f64>, means: &[f64]) -> Result<DMatrix<f64>> {
    if data.nrows() != means.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} channels vs {} fitted",
            data.nrows(),
            means.len()
        )));
    }
    Ok(DMatrix::from_fn(data.nrows(), data.ncols(), |i, j| data[[i, j]] - means[i]))
}

fn channel_means(rec: &Recording) -> Vec<f64> {
    rec.data()
        .outer_iter()
        .map(|row| row.sum() / row.len() as f64)
        .collect()
}

fn regularised(mut c: DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let p = c.nrows();
    let lambda = ridge * c.trace() / p as f64;
    for i in 0..p {
        c[(i, i)] += lambda;
    }
    c
}

fn inverse_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(c.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Numerical("covariance is not positive definite".into()));
    }
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose())
}

/// Joint decomposition of `eeg` against `refs`.
pub fn compute_cca(eeg: &Recording, refs: &Recording, params: &CcaParams) -> Result<CcaResult> {
    params.validate()?;
    let (p, q, n) = (eeg.n_channels(), refs.n_channels(), eeg.n_samples());
    if refs.n_samples() != n {
        return Err(Error::ShapeMismatch(format!(
            "EEG has {n} samples, references {}",
            refs.n_samples()
        )));
    }
    if n < 10 * (p + q) {
        return Err(Error::InvalidParam(format!(
            "sample count too small: {n} < 10 x {} channels",
            p + q
        )));
    }
    let eeg_means = channel_means(eeg);
    let ref_means = channel_means(refs);
    let x = centred(eeg.data(), &eeg_means)?;
    let y = centred(refs.data(), &ref_means)?;
    let scale = 1.0 / (n as f64 - 1.0);
    let cxx = (&x * x.transpose()) * scale;
    let cyy = (&y * y.transpose()) * scale;
    let cxy = (&x * y.transpose()) * scale;
    for (rec, c) in [(eeg, &cxx), (refs, &cyy)] {
        for i in 0..c.nrows() {
            if !(c[(i, i)] > 0.0) {
                return Err(Error::ZeroVariance(rec.channels()[i].name.clone()));
            }
        }
    }

    let kx = inverse_sqrt(&regularised(cxx.clone(), params.ridge))?;
    let ky = inverse_sqrt(&regularised(cyy, params.ridge))?;
    let t = &kx * &cxy * &ky;
    let svd = t.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numerical("SVD did not converge".into())),
    };
    let k = p.min(q);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    order.truncate(k);

    let mut eeg_weights = DMatrix::zeros(p, k);
    let mut ref_weights = DMatrix::zeros(q, k);
    let mut correlations = Vec::with_capacity(k);
    for (j, &o) in order.iter().enumerate() {
        let mut wx = &kx * u.column(o);
        let mut wy = &ky * v_t.row(o).transpose();
        // sign convention: largest-magnitude EEG weight positive
        let imax = wx.iamax();
        if wx[imax] < 0.0 {
            wx.neg_mut();
            wy.neg_mut();
        }
        eeg_weights.set_column(j, &wx);
        ref_weights.set_column(j, &wy);
        correlations.push(svd.singular_values[o].clamp(0.0, 1.0));
    }

    // least-squares patterns: A = Cxx W (Wᵀ Cxx W)⁻¹
    let cw = &cxx * &eeg_weights;
    let gram = eeg_weights.transpose() * &cw;
    let gram_inv = gram
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular component covariance".into()))?;
    let eeg_mixing = cw * gram_inv;

    Ok(CcaResult {
        correlations,
        eeg_weights,
        ref_weights,
        eeg_mixing,
        eeg_means,
        ref_means,
    })
}

/// Indices of components with ρ above the threshold, capped at `max_reject`.
pub fn select_artifact_components(result: &CcaResult, params: &CcaParams) -> Vec<usize> {
    let mut idx: Vec<usize> = result
        .correlations
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > params.rho_threshold)
        .map(|(i, _)| i)
        .collect();
    if let Some(cap) = params.max_reject {
        idx.truncate(cap);
    }
    idx
}

/// Subtracts the rejected components' contribution `A[:, R] U[R, :]`.
pub fn remove_components(eeg: &Recording, result: &CcaResult, reject: &[usize]) -> Result<Recording> {
    let k = result.n_components();
    if let Some(&bad) = reject.iter().find(|&&i| i >= k) {
        return Err(Error::InvalidParam(format!("component index {bad} out of range 0..{k}")));
    }
    if reject.is_empty() {
        return Ok(eeg.clone());
    }
    let x = centred(eeg.data(), &result.eeg_means)?;
    let w = result.eeg_weights.select_columns(reject);
    let a = result.eeg_mixing.select_columns(reject);
    let u = w.transpose() * &x;
    let removed = a * u;
    let mut data = eeg.data().clone();
    for ((i, j), v) in data.indexed_iter_mut() {
        *v -= removed[(i, j)];
    }
    eeg.with_data(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub index: usize,
    pub rho: f64,
    pub rejected: bool,
}

/// Outcome of one decomposition and rejection pass.
#[derive(Debug, Clone)]
pub struct CcaCleaning {
    pub cleaned: Recording,
    pub result: CcaResult,
    pub rejected: Vec<usize>,
    /// Sample range the decomposition was fitted on.
    pub span: (usize, usize),
}

impl CcaCleaning {
    pub fn report(&self) -> Vec<ComponentReport> {
        self.result
            .correlations
            .iter()
            .enumerate()
            .map(|(index, &rho)| ComponentReport {
                index,
                rho,
                rejected: self.rejected.contains(&index),
            })
            .collect()
    }
}

/// Decomposes, selects (or uses `manual` indices) and removes.
pub fn clean(
    eeg: &Recording,
    refs: &Recording,
    params: &CcaParams,
    manual: Option<&[usize]>,
) -> Result<CcaCleaning> {
    let result = compute_cca(eeg, refs, params)?;
    let rejected = match manual {
        Some(m) => {
            let mut m = m.to_vec();
            m.sort_unstable();
            m.dedup();
            m
        }
        None => select_artifact_components(&result, params),
    };
    let cleaned = remove_components(eeg, &result, &rejected)?;
    Ok(CcaCleaning {
        cleaned,
        result,
        rejected,
        span: (0, eeg.n_samples()),
    })
}

/// Per-window decomposition over non-overlapping windows of `params.window_s`.
/// A trailing remainder too short to fit is merged into the last window.
pub fn clean_windowed(eeg: &Recording, refs: &Recording, params: &CcaParams) -> Result<(Recording, Vec<CcaCleaning>)> {
    let window_s = params
        .window_s
        .ok_or_else(|| Error::InvalidParam("windowed CCA needs window_s".into()))?;
    let n = eeg.n_samples();
    let win = (window_s * eeg.rate_hz()).round() as usize;
    let min_len = 10 * (eeg.n_channels() + refs.n_channels());
    if win < min_len {
        return Err(Error::InvalidParam(format!(
            "window of {win} samples is shorter than the {min_len} needed"
        )));
    }
    let mut bounds = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = (start + win).min(n);
        if n - end < min_len {
            end = n;
        }
        bounds.push((start, end));
        start = end;
    }
    let mut data = eeg.data().clone();
    let mut passes = Vec::with_capacity(bounds.len());
    for (lo, hi) in bounds {
        let e = slice_recording(eeg, lo, hi)?;
        let r = slice_recording(refs, lo, hi)?;
        let mut pass = clean(&e, &r, params, None)?;
        data.slice_mut(ndarray::s![.., lo..hi]).assign(pass.cleaned.data());
        pass.span = (lo, hi);
        passes.push(pass);
    }
    Ok((eeg.with_data(data)?, passes))
}

fn slice_recording(rec: &Recording, lo: usize, hi: usize) -> Result<Recording> {
    let data = rec.data().slice(ndarray::s![.., lo..hi]).to_owned();
    Recording::new(rec.rate_hz(), rec.channels().to_vec(), data, Default::default())
}

/// Largest absolute pairwise correlation between component time courses.
pub fn max_component_cross_correlation(components: &DMatrix<f64>) -> f64 {
    let rows: Vec<Vec<f64>> = (0..components.nrows())
        .map(|i| components.row(i).iter().copied().collect())
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            if let Some(r) = stats::pearson(&rows[i], &rows[j]) {
                worst = worst.max(r.abs());
            }
        }
    }
    worst
}
