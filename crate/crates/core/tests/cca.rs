mod common;

use common::{block, cca_instance, gaussian_rows, oracle_correlations, pearson, variance, Mat};
use nalgebra::DMatrix;
use proptest::prelude::*;
use trio::cca::{compute_cca, remove_components, select_artifact_components, CcaParams, CcaResult};
use trio::pipeline::PipelineConfig;
use trio::synth::{generate_session, SessionConfig};
use trio::{Modality, Recording};

fn eeg(rows: &Mat) -> Recording {
    block(rows, Modality::Eeg, "E")
}

fn refs(rows: &Mat) -> Recording {
    block(rows, Modality::Emg, "R")
}

/// Rows centred and orthonormalised, scaled to unit sample variance.
fn orthonormal(rows: Mat) -> Mat {
    let n = rows[0].len();
    let mut out: Mat = Vec::new();
    for mut r in rows {
        let m = r.iter().sum::<f64>() / n as f64;
        r.iter_mut().for_each(|v| *v -= m);
        for q in &out {
            let d: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / (n as f64 - 1.0);
            r.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let s = (r.iter().map(|v| v * v).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        r.iter_mut().for_each(|v| *v /= s);
        out.push(r);
    }
    out
}

fn rows_of(m: &DMatrix<f64>) -> Mat {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[test]
fn toy_two_by_two_matches_oracle_and_closed_form() {
    let b = orthonormal(gaussian_rows(4, 2000, 21));
    let (s1, s2, s3, n1) = (&b[0], &b[1], &b[2], &b[3]);
    let x = vec![s1.clone(), s2.clone()];
    let y1: Vec<f64> = s1.iter().zip(n1).map(|(a, c)| 0.8 * a + 0.6 * c).collect();
    let y = vec![y1, s3.clone()];
    let params = CcaParams::default();
    let got = compute_cca(&eeg(&x), &refs(&y), &params).unwrap().correlations;
    let want = oracle_correlations(&x, &y, params.ridge);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-8, "{got:?} vs {want:?}");
    }
    assert!((got[0] - 0.8).abs() < 1e-6, "{got:?}");
    assert!(got[1] < 1e-6, "{got:?}");
}

#[test]
fn seeded_instances_match_the_oracle() {
    let params = CcaParams::default();
    for seed in 1000..1100 {
        let (x, y) = cca_instance(seed);
        let got = compute_cca(&eeg(&x), &refs(&y), &params).unwrap().correlations;
        let want = oracle_correlations(&x, &y, params.ridge);
        assert_eq!(got.len(), 3);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-8, "seed {seed}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn references_orthogonal_to_eeg_give_zero_correlations() {
    let all = orthonormal(gaussian_rows(7, 800, 5));
    let (x, y) = (all[..4].to_vec(), all[4..].to_vec());
    let res = compute_cca(&eeg(&x), &refs(&y), &CcaParams::default()).unwrap();
    assert!(res.correlations.iter().all(|&r| r <= 1e-6), "{:?}", res.correlations);
}

#[test]
fn rejecting_every_component_decorrelates_from_references() {
    let (x, y) = cca_instance(3);
    let (e, r) = (eeg(&x), refs(&y));
    let params = CcaParams::default();
    let res = compute_cca(&e, &r, &params).unwrap();
    let all: Vec<usize> = (0..res.n_components()).collect();
    let cleaned = remove_components(&e, &res, &all).unwrap();
    let again = compute_cca(&cleaned, &r, &params).unwrap();
    assert!(again.correlations[0] <= 0.05, "{:?}", again.correlations);
}

#[test]
fn simulated_session_rejects_three_and_recovers_clean_eeg() {
    let mut cfg = SessionConfig::default();
    cfg.protocol.n_trials = 12;
    cfg.gradient.enabled = false;
    cfg.cardiac.enabled = false;
    let s = generate_session(&cfg, 0).unwrap();
    let pcfg = PipelineConfig::default();
    let e = s.contaminated.select_channels(&pcfg.cca.eeg).unwrap();
    let r = s.contaminated.select_channels(&pcfg.cca.refs).unwrap();
    let res = compute_cca(&e, &r, &pcfg.cca.params).unwrap();
    let reject = select_artifact_components(&res, &pcfg.cca.params);
    assert_eq!(reject, vec![0, 1, 2]);
    let cleaned = remove_components(&e, &res, &reject).unwrap();
    let mut worst_before: f64 = 1.0;
    for c in 0..e.n_channels() {
        let truth = s.clean_eeg.channel(c).to_vec();
        let after = pearson(&cleaned.channel(c).to_vec(), &truth);
        assert!(after >= 0.9, "channel {c}: {after}");
        worst_before = worst_before.min(pearson(&e.channel(c).to_vec(), &truth));
    }
    assert!(worst_before <= 0.7, "{worst_before}");
}

fn components(res: &CcaResult, rec: &Recording) -> Mat {
    rows_of(&res.eeg_components(rec).unwrap())
}

fn mixed(y: &Mat, m: &[[f64; 3]; 3]) -> Mat {
    (0..3)
        .map(|i| (0..y[0].len()).map(|t| (0..3).map(|k| m[i][k] * y[k][t]).sum()).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn result_invariants_hold(seed in 0u64..10_000) {
        let (x, y) = cca_instance(seed);
        let e = eeg(&x);
        let res = compute_cca(&e, &refs(&y), &CcaParams::default()).unwrap();
        prop_assert!(res.correlations.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(res.correlations.iter().all(|&r| (0.0..=1.0 + 1e-9).contains(&r)));
        let u = components(&res, &e);
        for i in 0..u.len() {
            for j in i + 1..u.len() {
                prop_assert!(pearson(&u[i], &u[j]).abs() <= 1e-6);
            }
        }
        // residual of the least-squares reconstruction is orthogonal to U
        let n = x[0].len();
        for c in 0..4 {
            let m = x[c].iter().sum::<f64>() / n as f64;
            let resid: Vec<f64> = (0..n)
                .map(|t| x[c][t] - m - (0..u.len()).map(|k| res.eeg_mixing[(c, k)] * u[k][t]).sum::<f64>())
                .collect();
            let scale = variance(&x[c]).sqrt();
            for comp in &u {
                let dot = resid.iter().zip(comp).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                prop_assert!(dot.abs() <= 1e-6 * scale * variance(comp).sqrt());
            }
        }
    }

    #[test]
    fn correlations_survive_reference_mixing_and_eeg_scaling(
        seed in 0u64..10_000,
        m in prop::array::uniform3(prop::array::uniform3(-0.5f64..0.5)),
        scales in prop::array::uniform4(0.1f64..10.0),
    ) {
        let params = CcaParams { ridge: 0.0, ..CcaParams::default() };
        let (x, y) = cca_instance(seed);
        let base = compute_cca(&eeg(&x), &refs(&y), &params).unwrap().correlations;
        let mut mix = m;
        for (i, row) in mix.iter_mut().enumerate() {
            row[i] += 2.0;
        }
        let ym = mixed(&y, &mix);
        let xs: Mat = x.iter().zip(scales).map(|(r, s)| r.iter().map(|v| v * s).collect()).collect();
        let a = compute_cca(&eeg(&x), &refs(&ym), &params).unwrap().correlations;
        let b = compute_cca(&eeg(&xs), &refs(&y), &params).unwrap().correlations;
        for k in 0..base.len() {
            prop_assert!((a[k] - base[k]).abs() <= 1e-8, "{:?} {:?}", a, base);
            prop_assert!((b[k] - base[k]).abs() <= 1e-8, "{:?} {:?}", b, base);
        }
    }

    #[test]
    fn removal_is_idempotent_projective_and_never_adds_energy(
        seed in 0u64..10_000,
        mask in prop::collection::vec(any::<bool>(), 3),
    ) {
        let (x, y) = cca_instance(seed);
        let e = eeg(&x);
        let res = compute_cca(&e, &refs(&y), &CcaParams::default()).unwrap();
        let reject: Vec<usize> = (0..3).filter(|&k| mask[k]).collect();
        let once = remove_components(&e, &res, &reject).unwrap();
        let twice = remove_components(&once, &res, &reject).unwrap();
        for (a, b) in once.data().iter().zip(twice.data().iter()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        let u = components(&res, &e);
        for c in 0..4 {
            let row = once.channel(c).to_vec();
            prop_assert!(variance(&row) <= variance(&x[c]) * (1.0 + 1e-12));
            if variance(&row) > 1e-20 {
                for &k in &reject {
                    prop_assert!(pearson(&row, &u[k]).abs() <= 1e-6);
                }
            }
        }
    }
}
