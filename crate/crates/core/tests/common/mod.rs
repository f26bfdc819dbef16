//! Independent helpers for integration tests: a dense generalized
//! eigen-solver for canonical correlations and small statistics.
#![allow(dead_code)]

use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use trio::{ChannelInfo, MarkerList, Modality, Recording};

pub type Mat = Vec<Vec<f64>>;

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn gaussian_rows(rows: usize, n: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

/// Sample covariance (n - 1) between the rows of `a` and `b`.
pub fn cross_cov(a: &Mat, b: &Mat) -> Mat {
    let n = a[0].len();
    let mean = |r: &Vec<f64>| r.iter().sum::<f64>() / n as f64;
    let ma: Vec<f64> = a.iter().map(mean).collect();
    let mb: Vec<f64> = b.iter().map(mean).collect();
    a.iter()
        .enumerate()
        .map(|(i, ra)| {
            b.iter()
                .enumerate()
                .map(|(j, rb)| {
                    (0..n).map(|t| (ra[t] - ma[i]) * (rb[t] - mb[j])).sum::<f64>() / (n as f64 - 1.0)
                })
                .collect()
        })
        .collect()
}

fn cholesky(a: &Mat) -> Mat {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                assert!(d > 0.0, "matrix is not positive definite");
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Inverse of a lower-triangular matrix by forward substitution.
fn lower_inverse(l: &Mat) -> Mat {
    let n = l.len();
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        for i in 0..n {
            let rhs = if i == col { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|k| l[i][k] * inv[k][col]).sum();
            inv[i][col] = (rhs - s) / l[i][i];
        }
    }
    inv
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..p).map(|j| (0..m).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &Mat) -> Vec<f64> {
    let n = a.len();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i][i]).collect()
}

/// Canonical correlations from the block generalized eigenproblem
/// `[0 Cxy; Cyx 0] v = rho [Cxx 0; 0 Cyy] v`, with each diagonal block
/// regularised by `ridge * trace / dim`.
pub fn oracle_correlations(x: &Mat, y: &Mat, ridge: f64) -> Vec<f64> {
    let (p, q) = (x.len(), y.len());
    let mut all = x.clone();
    all.extend(y.iter().cloned());
    let c = cross_cov(&all, &all);
    let mut a = vec![vec![0.0; p + q]; p + q];
    let mut b = vec![vec![0.0; p + q]; p + q];
    for i in 0..p + q {
        for j in 0..p + q {
            let same_block = (i < p) == (j < p);
            if same_block {
                b[i][j] = c[i][j];
            } else {
                a[i][j] = c[i][j];
            }
        }
    }
    let tx: f64 = (0..p).map(|i| c[i][i]).sum::<f64>() / p as f64;
    let ty: f64 = (p..p + q).map(|i| c[i][i]).sum::<f64>() / q as f64;
    for i in 0..p + q {
        b[i][i] += ridge * if i < p { tx } else { ty };
    }
    let linv = lower_inverse(&cholesky(&b));
    let s = matmul(&matmul(&linv, &a), &transpose(&linv));
    let mut ev = jacobi_eigenvalues(&s);
    ev.sort_by(|u, v| v.partial_cmp(u).unwrap());
    ev.truncate(p.min(q));
    ev.into_iter().map(|r| r.clamp(0.0, 1.0)).collect()
}

pub fn block(rows: &Mat, modality: Modality, prefix: &str) -> Recording {
    let n = rows[0].len();
    let channels = (0..rows.len())
        .map(|i| ChannelInfo::new(format!("{prefix}{i}"), modality))
        .collect();
    let data = Array2::from_shape_fn((rows.len(), n), |(i, j)| rows[i][j]);
    Recording::new(500.0, channels, data, MarkerList::new()).unwrap()
}

/// Four EEG and three reference rows sharing three random sources.
pub fn cca_instance(seed: u64) -> (Mat, Mat) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 200 + rng.random_range(0..400);
    let mut x = gaussian_rows(4, n, seed.wrapping_mul(3) + 1);
    let mut y = gaussian_rows(3, n, seed.wrapping_mul(3) + 2);
    let shared = gaussian_rows(3, n, seed.wrapping_mul(3) + 3);
    for src in &shared {
        let gx: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let gy: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        for t in 0..n {
            for (i, g) in gx.iter().enumerate() {
                x[i][t] += g * src[t];
            }
            for (i, g) in gy.iter().enumerate() {
                y[i][t] += g * src[t];
            }
        }
    }
    (x, y)
}

/// Every file under `dir` with its contents, sorted by relative path.
pub fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
