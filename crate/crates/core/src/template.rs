//! Centred sliding-window templates shared by the gradient and pulse stages.

use serde::{Deserialize, Serialize};

use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    #[default]
    Mean,
    Median,
}

/// Calls `emit(r, template)` for every event `r` in `starts`, where the
/// template is the average of the demeaned segments `[start_j, start_j + len)`
/// for the `window` events centred on `r`. Only segments that fit inside `x`
/// contribute; the window is truncated one-sided at the ends of the run.
pub(crate) fn centred_templates(
    x: &[f64],
    starts: &[usize],
    len: usize,
    window: usize,
    kind: TemplateKind,
    mut emit: impl FnMut(usize, &[f64]),
) {
    let full = starts.iter().take_while(|&&s| s + len <= x.len()).count();
    if full == 0 || len == 0 {
        return;
    }
    let demeaned = |r: usize| -> Vec<f64> {
        let seg = &x[starts[r]..starts[r] + len];
        let m = stats::mean(seg);
        seg.iter().map(|v| v - m).collect()
    };
    let half = window / 2;
    let bounds = |r: usize| {
        let centre = r.min(full - 1);
        (centre.saturating_sub(half), (centre + half + 1).min(full))
    };
    let mut template = vec![0.0; len];

    match kind {
        TemplateKind::Mean => {
            let mut sum = vec![0.0; len];
            let (mut lo, mut hi) = (0usize, 0usize);
            for r in 0..starts.len() {
                let (want_lo, want_hi) = bounds(r);
                while hi < want_hi {
                    for (s, v) in sum.iter_mut().zip(demeaned(hi)) {
                        *s += v;
                    }
                    hi += 1;
                }
                while lo < want_lo {
                    for (s, v) in sum.iter_mut().zip(demeaned(lo)) {
                        *s -= v;
                    }
                    lo += 1;
                }
                let count = (hi - lo) as f64;
                for (t, s) in template.iter_mut().zip(&sum) {
                    *t = s / count;
                }
                emit(r, &template);
            }
        }
        TemplateKind::Median => {
            let segs: Vec<Vec<f64>> = (0..full).map(demeaned).collect();
            let mut column = Vec::with_capacity(window);
            for r in 0..starts.len() {
                let (lo, hi) = bounds(r);
                for (i, t) in template.iter_mut().enumerate() {
                    column.clear();
                    column.extend(segs[lo..hi].iter().map(|s| s[i]));
                    *t = stats::median(&column);
                }
                emit(r, &template);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_truncates_at_edges() {
        // segment r holds the constant-free ramp scaled by (r + 1)
        let len = 4;
        let ramp = [-1.5, -0.5, 0.5, 1.5];
        let mut x = Vec::new();
        for r in 0..7 {
            x.extend(ramp.iter().map(|v| v * (r + 1) as f64));
        }
        let starts: Vec<usize> = (0..7).map(|r| r * len).collect();
        let mut got = Vec::new();
        centred_templates(&x, &starts, len, 3, TemplateKind::Mean, |r, t| got.push((r, t[3])));
        // r = 0 averages segments 0..2 (scales 1, 2); interior r averages r-1..=r+1
        assert!((got[0].1 - 1.5 * 1.5).abs() < 1e-12);
        assert!((got[3].1 - 1.5 * 4.0).abs() < 1e-12);
        assert!((got[6].1 - 1.5 * 6.5).abs() < 1e-12);
    }

    #[test]
    fn median_rejects_an_outlier_segment() {
        let len = 3;
        let mut x = Vec::new();
        for r in 0..5 {
            let g = if r == 2 { 100.0 } else { 1.0 };
            x.extend([-g, 0.0, g]);
        }
        let starts: Vec<usize> = (0..5).map(|r| r * len).collect();
        let mut mid = Vec::new();
        centred_templates(&x, &starts, len, 5, TemplateKind::Median, |r, t| {
            if r == 2 {
                mid = t.to_vec();
            }
        });
        assert_eq!(mid, vec![-1.0, 0.0, 1.0]);
    }
}
