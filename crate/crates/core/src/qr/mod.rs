//! Weighted, l1-penalized quantile regression.
//!
//! Solves `min_c Σ w_i ρτ(y_i − d_iᵀ c) + Σ l_j |c_j|` exactly. Penalty terms
//! are folded into the check loss as pseudo-observations, so one LP solver
//! handles both. Wide designs are handled with a working set of columns that
//! grows until the excluded columns satisfy their optimality conditions.

mod ipm;
mod kkt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::independent_subset;

pub use kkt::{verify_subgradient, KktReport};

/// Designs with more columns than this are solved with a working set.
pub const WORKING_SET_THRESHOLD: usize = 64;
const MAX_ADD_PER_ROUND: usize = 10;
const MAX_ROUNDS: usize = 200;

/// `ρτ(u) = u (τ − I(u < 0))`.
#[inline]
pub fn check_loss(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

/// A single weighted l1-penalized quantile regression problem.
#[derive(Debug, Clone, Copy)]
pub struct QrProblem<'a> {
    design: &'a DMatrix<f64>,
    response: &'a DVector<f64>,
    tau: f64,
    obs_weights: &'a [f64],
    l1_weights: &'a [f64],
}

impl<'a> QrProblem<'a> {
    /// Rows with zero observation weight are ignored entirely, so their
    /// design entries may be NaN. A zero l1 weight leaves a column unpenalized.
    pub fn new(
        design: &'a DMatrix<f64>,
        response: &'a DVector<f64>,
        tau: f64,
        obs_weights: &'a [f64],
        l1_weights: &'a [f64],
    ) -> Result<Self> {
        let (n, m) = design.shape();
        if response.len() != n || obs_weights.len() != n {
            return Err(Error::Dimension(format!(
                "design has {n} rows, response {} and weights {}",
                response.len(),
                obs_weights.len()
            )));
        }
        if l1_weights.len() != m {
            return Err(Error::Dimension(format!(
                "design has {m} columns but {} l1 weights",
                l1_weights.len()
            )));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain { value: tau, lo: 0.0, hi: 1.0 });
        }
        if obs_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("observation weights must be finite and >= 0".into()));
        }
        if l1_weights.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::Config("l1 weights must be finite and >= 0".into()));
        }
        let problem = QrProblem { design, response, tau, obs_weights, l1_weights };
        if problem.rows().next().is_none() {
            return Err(Error::NoData);
        }
        for i in problem.rows() {
            if !response[i].is_finite() || design.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("weighted design row"));
            }
        }
        Ok(problem)
    }

    pub fn design(&self) -> &DMatrix<f64> {
        self.design
    }
    pub fn response(&self) -> &DVector<f64> {
        self.response
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn obs_weights(&self) -> &[f64] {
        self.obs_weights
    }
    pub fn l1_weights(&self) -> &[f64] {
        self.l1_weights
    }

    /// Indices of rows with positive weight.
    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.obs_weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i)
    }

    /// Weighted check loss of the coefficients, without penalty.
    pub fn loss(&self, coef: &DVector<f64>) -> f64 {
        self.rows()
            .map(|i| {
                let fit = self.design.row(i).transpose().dot(coef);
                self.obs_weights[i] * check_loss(self.response[i] - fit, self.tau)
            })
            .sum()
    }

    /// Loss plus `Σ l_j |c_j|`.
    pub fn objective(&self, coef: &DVector<f64>) -> f64 {
        let pen: f64 = coef
            .iter()
            .zip(self.l1_weights)
            .map(|(c, l)| l * c.abs())
            .sum();
        self.loss(coef) + pen
    }
}

#[derive(Debug, Clone)]
pub struct QrSolution {
    pub coef: DVector<f64>,
    pub objective: f64,
    /// Check-loss subgradient per row; zero for rows with zero weight.
    pub psi: DVector<f64>,
    /// Columns with nonzero coefficients.
    pub active_set: Vec<usize>,
    /// Columns that were part of the final restricted solve.
    pub working_set: Vec<usize>,
    pub iterations: usize,
    pub gap: f64,
    /// True when the final vertex carries an exact dual certificate.
    pub certified: bool,
    pub rounds: usize,
}

pub fn solve(problem: &QrProblem) -> Result<QrSolution> {
    solve_with_hint(problem, &[])
}

/// Like [`solve`], seeding the working set with `hint` for wide designs.
pub fn solve_with_hint(problem: &QrProblem, hint: &[usize]) -> Result<QrSolution> {
    let m = problem.design.ncols();
    let rows: Vec<usize> = problem.rows().collect();
    if m <= WORKING_SET_THRESHOLD {
        let cols: Vec<usize> = (0..m).collect();
        return restricted(problem, &rows, &cols, 1);
    }

    let mut in_set = vec![false; m];
    for j in 0..m {
        if problem.l1_weights[j] == 0.0 {
            in_set[j] = true;
        }
    }
    for &j in hint.iter().filter(|&&j| j < m) {
        in_set[j] = true;
    }
    let mut rounds = 0;
    loop {
        rounds += 1;
        let cols: Vec<usize> = (0..m).filter(|&j| in_set[j]).collect();
        let sol = restricted(problem, &rows, &cols, rounds)?;
        let mut violators: Vec<(f64, usize)> = (0..m)
            .filter(|&j| !in_set[j])
            .filter_map(|j| {
                let (g, mass) = rows.iter().fold((0.0, 0.0), |(g, mass), &i| {
                    let v = problem.obs_weights[i] * problem.design[(i, j)];
                    (g + v * sol.psi[i], mass + v.abs())
                });
                let excess = g.abs() - problem.l1_weights[j];
                (excess > 1e-8 * (1.0 + mass)).then_some((excess, j))
            })
            .collect();
        if violators.is_empty() || rounds >= MAX_ROUNDS {
            if !violators.is_empty() {
                log::warn!("working set did not close after {rounds} rounds");
            }
            return Ok(sol);
        }
        violators.sort_by(|a, b| b.0.total_cmp(&a.0));
        for &(_, j) in violators.iter().take(MAX_ADD_PER_ROUND) {
            in_set[j] = true;
        }
    }
}

/// Solves the problem with coefficients outside `cols` fixed at zero.
fn restricted(
    problem: &QrProblem,
    rows: &[usize],
    cols: &[usize],
    rounds: usize,
) -> Result<QrSolution> {
    let m = problem.design.ncols();
    let n = problem.design.nrows();
    let cols = &drop_dependent_unpenalized(problem, rows, cols);
    let penalized: Vec<(usize, f64)> = cols
        .iter()
        .enumerate()
        .filter(|(_, &j)| problem.l1_weights[j] > 0.0)
        .map(|(k, &j)| (k, problem.l1_weights[j]))
        .collect();
    let total = rows.len() + 2 * penalized.len();
    let mut a = DMatrix::zeros(total, cols.len());
    let mut b = DVector::zeros(total);
    for (r, &i) in rows.iter().enumerate() {
        let w = problem.obs_weights[i];
        b[r] = w * problem.response[i];
        for (k, &j) in cols.iter().enumerate() {
            a[(r, k)] = w * problem.design[(i, j)];
        }
    }
    for (p, &(k, l)) in penalized.iter().enumerate() {
        let r = rows.len() + 2 * p;
        a[(r, k)] = l;
        a[(r + 1, k)] = -l;
    }

    let dense = ipm::solve_dense(&a, &b, problem.tau)?;
    let mut coef = DVector::zeros(m);
    for (k, &j) in cols.iter().enumerate() {
        coef[j] = dense.coef[k];
    }
    let mut psi = DVector::zeros(n);
    for (r, &i) in rows.iter().enumerate() {
        psi[i] = dense.psi[r];
    }
    let active_set = (0..m).filter(|&j| coef[j] != 0.0).collect();
    Ok(QrSolution {
        objective: problem.objective(&coef),
        coef,
        psi,
        active_set,
        working_set: cols.to_vec(),
        iterations: dense.iterations,
        gap: dense.gap,
        certified: dense.certified,
        rounds,
    })
}

/// Unpenalized columns that are linear combinations of earlier unpenalized
/// columns over the weighted rows are not identifiable; they are held at 0.
fn drop_dependent_unpenalized(problem: &QrProblem, rows: &[usize], cols: &[usize]) -> Vec<usize> {
    let free: Vec<usize> = cols
        .iter()
        .copied()
        .filter(|&j| problem.l1_weights[j] == 0.0)
        .collect();
    if free.is_empty() {
        return cols.to_vec();
    }
    let block = DMatrix::from_fn(free.len(), rows.len(), |k, r| {
        problem.obs_weights[rows[r]] * problem.design[(rows[r], free[k])]
    });
    let order: Vec<usize> = (0..free.len()).collect();
    let keep = independent_subset(&block, &order);
    if keep.len() == free.len() {
        return cols.to_vec();
    }
    let mut dropped = vec![false; problem.design.ncols()];
    for k in (0..free.len()).filter(|k| !keep.contains(k)) {
        dropped[free[k]] = true;
    }
    log::debug!("holding {} dependent unpenalized columns at zero", free.len() - keep.len());
    cols.iter().copied().filter(|&j| !dropped[j]).collect()
}
