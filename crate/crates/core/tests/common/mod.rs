#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Exhaustive vertex search for `min Σ w ρτ(y − Xc) + Σ l|c|` with at most
/// two columns: every optimum of this LP sits where `m` of the augmented
/// rows (data rows or `c_j = 0` constraints) have zero residual.
pub fn brute_force(x: &DMatrix<f64>, y: &DVector<f64>, w: &[f64], l1: &[f64], tau: f64) -> f64 {
    let m = x.ncols();
    let mut rows: Vec<(Vec<f64>, f64)> = (0..x.nrows())
        .filter(|&i| w[i] > 0.0)
        .map(|i| ((0..m).map(|j| x[(i, j)]).collect(), y[i]))
        .collect();
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        rows.push((e, 0.0));
    }
    let objective = |c: &[f64]| {
        let mut f = 0.0;
        for i in 0..x.nrows() {
            if w[i] > 0.0 {
                let r = y[i] - (0..m).map(|j| x[(i, j)] * c[j]).sum::<f64>();
                f += w[i] * if r < 0.0 { r * (tau - 1.0) } else { r * tau };
            }
        }
        f + (0..m).map(|j| l1[j] * c[j].abs()).sum::<f64>()
    };
    let mut best = f64::INFINITY;
    match m {
        1 => {
            for (a, b) in &rows {
                if a[0].abs() > 1e-12 {
                    best = best.min(objective(&[b / a[0]]));
                }
            }
        }
        2 => {
            for p in 0..rows.len() {
                for q in p + 1..rows.len() {
                    let (a1, b1) = &rows[p];
                    let (a2, b2) = &rows[q];
                    let det = a1[0] * a2[1] - a1[1] * a2[0];
                    if det.abs() < 1e-10 {
                        continue;
                    }
                    let c0 = (b1 * a2[1] - a1[1] * b2) / det;
                    let c1 = (a1[0] * b2 - b1 * a2[0]) / det;
                    best = best.min(objective(&[c0, c1]));
                }
            }
        }
        _ => panic!("oracle supports one or two columns"),
    }
    best
}
