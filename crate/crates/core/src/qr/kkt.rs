//! Subgradient optimality check for a candidate solution.

use nalgebra::{DMatrix, DVector};

use crate::linalg::bounded_least_squares;

use super::QrProblem;

/// Outcome of [`verify_subgradient`]. Quantities are divided by the number
/// of weighted rows so they are on the scale of a mean loss.
#[derive(Debug, Clone)]
pub struct KktReport {
    /// Largest stationarity violation over unpenalized and active columns.
    pub stationarity: f64,
    /// Largest `|g_j|` over inactive penalized columns.
    pub inactive_max: f64,
    /// Largest `|g_j| − l_j` over inactive penalized columns.
    pub inactive_excess: f64,
    /// Number of rows with zero residual.
    pub zero_residuals: usize,
}

impl KktReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.stationarity <= tol && self.inactive_excess <= tol
    }
}

/// Checks `0 ∈ −Σ w_i d_i ψ_i + l ⊙ ∂|c|` with `ψ_i ∈ ∂ρτ(r_i)`. Multipliers
/// on zero-residual rows are chosen by bounded least squares.
pub fn verify_subgradient(problem: &QrProblem, coef: &DVector<f64>) -> KktReport {
    let design = problem.design();
    let y = problem.response();
    let w = problem.obs_weights();
    let l1 = problem.l1_weights();
    let tau = problem.tau();
    let m = design.ncols();
    let rows: Vec<usize> = problem.rows().collect();
    let scale = rows.iter().map(|&i| y[i].abs()).fold(1.0, f64::max);

    let mut base = DVector::zeros(m);
    let mut zero = Vec::new();
    for &i in &rows {
        let r = y[i] - design.row(i).transpose().dot(coef);
        if r.abs() <= 1e-9 * scale {
            zero.push(i);
        } else {
            let psi = if r > 0.0 { tau } else { tau - 1.0 };
            base.axpy(w[i] * psi, &design.row(i).transpose(), 1.0);
        }
    }

    let equality: Vec<usize> = (0..m).filter(|&j| l1[j] == 0.0 || coef[j] != 0.0).collect();
    let target = DVector::from_iterator(
        equality.len(),
        equality.iter().map(|&j| l1[j] * coef[j].signum() * (coef[j] != 0.0) as u8 as f64 - base[j]),
    );
    let mz = DMatrix::from_fn(m, zero.len(), |j, k| w[zero[k]] * design[(zero[k], j)]);
    let me = mz.select_rows(&equality);
    let a = bounded_least_squares(&me, &target, tau - 1.0, tau);

    let g = &base + &mz * &a;
    let nn = rows.len() as f64;
    let stationarity = equality
        .iter()
        .enumerate()
        .map(|(k, &j)| (g[j] - (target[k] + base[j])).abs())
        .fold(0.0, f64::max)
        / nn;
    let inactive: Vec<usize> = (0..m).filter(|&j| l1[j] > 0.0 && coef[j] == 0.0).collect();
    let inactive_max = inactive.iter().map(|&j| g[j].abs()).fold(0.0, f64::max) / nn;
    let inactive_excess = inactive
        .iter()
        .map(|&j| g[j].abs() - l1[j])
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
        / nn;
    KktReport {
        stationarity,
        inactive_max,
        inactive_excess,
        zero_residuals: zero.len(),
    }
}
