//! Estimators built on the weighted quantile regression solver: unpenalized
//! fits, nonconvex-penalized fits by local linear approximation (LLA), and
//! tuning by an information criterion over a (lambda, knots) grid.

mod designate;
mod interval;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ModelFrame, ZScale};
use crate::ipw::{WeightEstimate, WeightMethod};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::qr::{self, QrProblem};
use crate::splines::{AdditiveBasis, DEFAULT_DEGREE};

pub use designate::{wqbic_designate, Designation, DesignationClass};
pub use interval::{prediction_interval, IntervalConfig, IntervalReport};

pub const DEFAULT_LLA_TOL: f64 = 1e-7;
pub const DEFAULT_LLA_MAX_ITER: usize = 50;
pub const DEFAULT_GRID_SIZE: usize = 30;
pub const DEFAULT_GRID_RATIO: f64 = 1e-3;
/// Allowed increase of the penalized objective between LLA iterates.
pub const DESCENT_SLACK: f64 = 1e-9;

/// Penalty family and shape; `lambda` comes from the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyChoice {
    pub family: PenaltyFamily,
    pub a: f64,
}

impl PenaltyChoice {
    pub fn new(family: PenaltyFamily) -> Self {
        PenaltyChoice { family, a: family.default_a() }
    }
    pub fn at(&self, lambda: f64) -> Result<PenaltySpec> {
        PenaltySpec::new(self.family, lambda, self.a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub tau: f64,
    /// `None` fits without penalty.
    pub penalty: Option<PenaltyChoice>,
    /// Explicit lambdas; when absent a log-spaced grid below `lambda_max`
    /// is built for each knot configuration.
    pub lambda_grid: Option<Vec<f64>>,
    pub grid_size: usize,
    /// Smallest grid lambda as a fraction of `lambda_max`.
    pub grid_ratio: f64,
    /// Candidate internal-knot counts per nonlinear variable. A single
    /// entry is shared by every variable.
    pub knot_grid: Vec<Vec<usize>>,
    pub degree: usize,
    pub lla_tol: f64,
    pub lla_max_iter: usize,
    /// Stop walking down the lambda path once more than this many linear
    /// coefficients are nonzero.
    pub max_active: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            tau: 0.5,
            penalty: Some(PenaltyChoice::new(PenaltyFamily::Scad)),
            lambda_grid: None,
            grid_size: DEFAULT_GRID_SIZE,
            grid_ratio: DEFAULT_GRID_RATIO,
            knot_grid: vec![vec![0, 1, 2]],
            degree: DEFAULT_DEGREE,
            lla_tol: DEFAULT_LLA_TOL,
            lla_max_iter: DEFAULT_LLA_MAX_ITER,
            max_active: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Domain { value: self.tau, lo: 0.0, hi: 1.0 });
        }
        if !(self.lla_tol > 0.0) || self.lla_max_iter == 0 {
            return Err(Error::Config("LLA tolerance and iteration cap must be positive".into()));
        }
        if self.degree < 1 {
            return Err(Error::Config("spline degree must be at least 1".into()));
        }
        if self.knot_grid.is_empty() || self.knot_grid.iter().any(Vec::is_empty) {
            return Err(Error::Config("knot grid is empty".into()));
        }
        if let Some(p) = &self.penalty {
            p.at(1.0)?;
            match &self.lambda_grid {
                Some(g) if g.is_empty() => return Err(Error::Config("lambda grid is empty".into())),
                Some(g) if g.iter().any(|l| !(l.is_finite() && *l > 0.0)) => {
                    return Err(Error::Config("lambdas must be positive".into()))
                }
                None if self.grid_size == 0 || !(self.grid_ratio > 0.0 && self.grid_ratio < 1.0) => {
                    return Err(Error::Config("grid size and ratio".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Every knot vector in the grid, in lexicographic order.
    pub fn knot_configs(&self, d: usize) -> Result<Vec<Vec<usize>>> {
        let per_var: Vec<&Vec<usize>> = match self.knot_grid.len() {
            1 => vec![&self.knot_grid[0]; d],
            k if k == d => self.knot_grid.iter().collect(),
            k => {
                return Err(Error::Dimension(format!(
                    "knot grid has {k} entries for {d} nonlinear variables"
                )))
            }
        };
        let mut out = vec![vec![]];
        for choices in per_var {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<usize>| {
                    choices.iter().map(move |&k| {
                        let mut v = prefix.clone();
                        v.push(k);
                        v
                    })
                })
                .collect();
        }
        Ok(out)
    }
}

/// One row of the tuning table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub lambda: Option<f64>,
    pub knots: Vec<usize>,
    pub nu: usize,
    pub qbic: f64,
    pub active: usize,
    pub lla_iterations: usize,
    pub lla_converged: bool,
    pub descent_violations: usize,
    pub solves: usize,
    pub uncertified_solves: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LlaTrace {
    pub iterations: usize,
    pub converged: bool,
    /// Penalized objective after each iterate.
    pub objectives: Vec<f64>,
    pub descent_violations: usize,
    pub solves: usize,
    pub uncertified_solves: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub tau: f64,
    pub beta: DVector<f64>,
    /// Constant followed by the spline blocks.
    pub xi: DVector<f64>,
    pub basis: AdditiveBasis,
    pub z_scales: Vec<ZScale>,
    pub active_set: Vec<usize>,
    /// `n⁻¹ Σ w ρτ + Σ p_λ(|β_j|)` (no penalty term for unpenalized fits).
    pub objective: f64,
    /// `Σ w ρτ`.
    pub loss: f64,
    pub lambda: Option<f64>,
    pub knots: Vec<usize>,
    pub nu: usize,
    pub qbic: f64,
    pub weight_method: WeightMethod,
    pub lla: LlaTrace,
    pub score_table: Vec<ScoreRow>,
}

impl FitResult {
    /// `ĝ(u) = b(u)ᵀ ξ̂` for `u` on the rescaled unit scale.
    pub fn ghat(&self, u: &[f64]) -> Result<f64> {
        let mut row = vec![0.0; self.basis.width()];
        self.basis.row(u, &mut row)?;
        Ok(row.iter().zip(self.xi.iter()).map(|(a, b)| a * b).sum())
    }

    /// Contribution of nonlinear block `j` alone at `u` (unit scale),
    /// excluding the constant.
    pub fn component(&self, j: usize, u: f64) -> Result<f64> {
        let basis = self
            .basis
            .bases()
            .get(j)
            .ok_or_else(|| Error::Dimension(format!("no nonlinear block {j}")))?;
        let b = basis.evaluate(u)?;
        let xi = &self.xi.as_slice()[self.basis.block_range(j)];
        Ok(b.iter().zip(xi).map(|(a, c)| a * c).sum())
    }

    /// Fitted quantile for raw covariate values; `z_raw` is rescaled with
    /// the training map and clamped.
    pub fn predict(&self, x: &[f64], z_raw: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() || z_raw.len() != self.z_scales.len() {
            return Err(Error::Dimension("prediction row".into()));
        }
        let u: Vec<f64> = z_raw.iter().zip(&self.z_scales).map(|(v, s)| s.apply(*v).0).collect();
        let lin: f64 = x.iter().zip(self.beta.iter()).map(|(a, b)| a * b).sum();
        Ok(lin + self.ghat(&u)?)
    }
}

/// Linear columns followed by the constant and spline blocks.
pub struct FitDesign {
    pub basis: AdditiveBasis,
    pub matrix: DMatrix<f64>,
    pub p: usize,
}

pub fn fit_design(frame: &ModelFrame, knots: &[usize], degree: usize) -> Result<FitDesign> {
    let basis = AdditiveBasis::from_frame(frame, knots, degree)?;
    let spline = basis.design(frame.z())?;
    let p = frame.p();
    let n = frame.n();
    let matrix = DMatrix::from_fn(n, p + spline.ncols(), |i, j| {
        if j < p {
            frame.x()[(i, j)]
        } else {
            spline[(i, j - p)]
        }
    });
    Ok(FitDesign { basis, matrix, p })
}

/// `ln(loss) + ν ln(n) / (2n)`.
pub fn qbic_score(loss: f64, n: usize, nu: usize) -> Result<f64> {
    if !(loss > 0.0) {
        return Err(Error::ZeroLoss);
    }
    let n = n as f64;
    Ok(loss.ln() + nu as f64 * n.ln() / (2.0 * n))
}

/// Effective parameter count: nonzero linear terms plus spline block widths.
pub fn effective_dof(active: usize, knots: &[usize], degree: usize) -> usize {
    active + knots.iter().map(|k| k + degree).sum::<usize>()
}

fn check_weights(frame: &ModelFrame, weights: &WeightEstimate) -> Result<()> {
    if weights.weights.len() != frame.n() {
        return Err(Error::Dimension(format!(
            "{} weights for {} rows",
            weights.weights.len(),
            frame.n()
        )));
    }
    Ok(())
}

fn rank_warning(design: &FitDesign, weights: &[f64]) {
    let effective = weights.iter().filter(|w| **w > 0.0).count();
    if effective < design.matrix.ncols() {
        log::warn!(
            "{effective} weighted rows for {} coefficients",
            design.matrix.ncols()
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    frame: &ModelFrame,
    cfg: &FitConfig,
    weights: &WeightEstimate,
    design: &FitDesign,
    coef: &DVector<f64>,
    loss: f64,
    objective: f64,
    lambda: Option<f64>,
    knots: &[usize],
    lla: LlaTrace,
) -> Result<FitResult> {
    let p = design.p;
    let beta = coef.rows(0, p).into_owned();
    let xi = coef.rows(p, coef.len() - p).into_owned();
    let active_set: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
    let nu = effective_dof(active_set.len(), knots, cfg.degree);
    let qbic = qbic_score(loss, frame.n(), nu)?;
    Ok(FitResult {
        tau: cfg.tau,
        beta,
        xi,
        basis: design.basis.clone(),
        z_scales: frame.z_scales().to_vec(),
        active_set,
        objective,
        loss,
        lambda,
        knots: knots.to_vec(),
        nu,
        qbic,
        weight_method: weights.method,
        lla,
        score_table: vec![],
    })
}

/// Weighted quantile regression on every column without penalty.
pub fn fit_unpenalized(
    frame: &ModelFrame,
    cfg: &FitConfig,
    weights: &WeightEstimate,
    knots: &[usize],
) -> Result<FitResult> {
    check_weights(frame, weights)?;
    let design = fit_design(frame, knots, cfg.degree)?;
    rank_warning(&design, &weights.weights);
    let l1 = vec![0.0; design.matrix.ncols()];
    let problem = QrProblem::new(&design.matrix, frame.y(), cfg.tau, &weights.weights, &l1)?;
    let sol = qr::solve(&problem)?;
    let loss = problem.loss(&sol.coef);
    let trace = LlaTrace {
        converged: true,
        solves: 1,
        uncertified_solves: usize::from(!sol.certified),
        ..LlaTrace::default()
    };
    let obj = loss / frame.n() as f64;
    assemble(frame, cfg, weights, &design, &sol.coef, loss, obj, None, knots, trace)
}

/// Smallest lambda at which the LASSO-initialized step keeps every linear
/// coefficient at zero, read off the dual of the spline-only fit.
pub fn lambda_max(
    frame: &ModelFrame,
    design: &FitDesign,
    tau: f64,
    weights: &[f64],
) -> Result<f64> {
    let p = design.p;
    let spline = design.matrix.columns(p, design.matrix.ncols() - p).into_owned();
    let l1 = vec![0.0; spline.ncols()];
    let problem = QrProblem::new(&spline, frame.y(), tau, weights, &l1)?;
    let sol = qr::solve(&problem)?;
    let mut best: f64 = 0.0;
    for j in 0..p {
        let g: f64 = problem
            .rows()
            .map(|i| weights[i] * design.matrix[(i, j)] * sol.psi[i])
            .sum();
        best = best.max(g.abs());
    }
    Ok(best / frame.n() as f64)
}

/// `size` log-spaced values from `lmax` down to `ratio · lmax`.
pub fn lambda_grid(lmax: f64, size: usize, ratio: f64) -> Vec<f64> {
    if size == 1 {
        return vec![lmax];
    }
    let (hi, lo) = (lmax.ln(), (lmax * ratio).ln());
    (0..size)
        .map(|k| (hi + (lo - hi) * k as f64 / (size - 1) as f64).exp())
        .collect()
}

struct LlaOutcome {
    coef: DVector<f64>,
    loss: f64,
    objective: f64,
    trace: LlaTrace,
}

fn penalized_objective(loss: f64, n: f64, beta: &[f64], spec: &PenaltySpec) -> f64 {
    loss / n + beta.iter().map(|b| spec.value(*b)).sum::<f64>()
}

fn lla_on_design(
    frame: &ModelFrame,
    cfg: &FitConfig,
    weights: &[f64],
    design: &FitDesign,
    spec: &PenaltySpec,
    hint: &[usize],
) -> Result<LlaOutcome> {
    let p = design.p;
    let m = design.matrix.ncols();
    let n = frame.n() as f64;
    let mut l1 = vec![0.0; m];
    let mut beta_prev = vec![0.0; p];
    let mut trace = LlaTrace::default();
    let mut hint = hint.to_vec();
    let mut last: Option<(DVector<f64>, f64)> = None;
    let mut prev_obj = f64::INFINITY;

    for _ in 0..cfg.lla_max_iter {
        for j in 0..p {
            l1[j] = n * spec.derivative(beta_prev[j]);
        }
        let problem = QrProblem::new(&design.matrix, frame.y(), cfg.tau, weights, &l1)?;
        let sol = qr::solve_with_hint(&problem, &hint)?;
        trace.solves += 1;
        trace.iterations += 1;
        if !sol.certified {
            trace.uncertified_solves += 1;
        }
        let loss = problem.loss(&sol.coef);
        let beta: Vec<f64> = sol.coef.iter().take(p).copied().collect();
        let obj = penalized_objective(loss, n, &beta, spec);
        if obj > prev_obj + DESCENT_SLACK * (1.0 + prev_obj.abs()) {
            trace.descent_violations += 1;
            log::warn!("LLA objective rose from {prev_obj} to {obj}");
        }
        trace.objectives.push(obj);
        prev_obj = obj;
        let change: f64 = beta.iter().zip(&beta_prev).map(|(a, b)| (a - b).abs()).sum();
        let unchanged_weights = beta
            .iter()
            .zip(&l1[..p])
            .all(|(b, l)| n * spec.derivative(*b) == *l);
        hint = sol.active_set.clone();
        beta_prev = beta;
        last = Some((sol.coef, loss));
        // identical inner weights would reproduce the same solve
        if change < cfg.lla_tol || unchanged_weights {
            trace.converged = true;
            break;
        }
    }
    let (coef, loss) = last.ok_or_else(|| Error::Config("LLA ran no iterations".into()))?;
    if !trace.converged {
        log::warn!("LLA stopped at {} iterations without converging", trace.iterations);
    }
    Ok(LlaOutcome { coef, loss, objective: prev_obj, trace })
}

/// Penalized fit at a single lambda and knot vector.
pub fn fit_lla(
    frame: &ModelFrame,
    cfg: &FitConfig,
    weights: &WeightEstimate,
    knots: &[usize],
    lambda: f64,
) -> Result<FitResult> {
    check_weights(frame, weights)?;
    let choice = cfg
        .penalty
        .ok_or_else(|| Error::Config("fit_lla needs a penalty".into()))?;
    let spec = choice.at(lambda)?;
    let design = fit_design(frame, knots, cfg.degree)?;
    rank_warning(&design, &weights.weights);
    let out = lla_on_design(frame, cfg, &weights.weights, &design, &spec, &[])?;
    assemble(
        frame,
        cfg,
        weights,
        &design,
        &out.coef,
        out.loss,
        out.objective,
        Some(lambda),
        knots,
        out.trace,
    )
}

fn path_for_knots(
    frame: &ModelFrame,
    cfg: &FitConfig,
    weights: &WeightEstimate,
    knots: &[usize],
) -> Result<Vec<FitResult>> {
    let design = fit_design(frame, knots, cfg.degree)?;
    rank_warning(&design, &weights.weights);
    let unpenalized = || -> Result<Vec<FitResult>> {
        let l1 = vec![0.0; design.matrix.ncols()];
        let problem =
            QrProblem::new(&design.matrix, frame.y(), cfg.tau, &weights.weights, &l1)?;
        let sol = qr::solve(&problem)?;
        let loss = problem.loss(&sol.coef);
        let trace = LlaTrace {
            converged: true,
            solves: 1,
            uncertified_solves: usize::from(!sol.certified),
            ..LlaTrace::default()
        };
        let obj = loss / frame.n() as f64;
        Ok(vec![assemble(
            frame, cfg, weights, &design, &sol.coef, loss, obj, None, knots, trace,
        )?])
    };
    let Some(choice) = cfg.penalty else {
        return unpenalized();
    };
    let mut grid = match &cfg.lambda_grid {
        Some(g) => g.clone(),
        None => {
            let lmax = lambda_max(frame, &design, cfg.tau, &weights.weights)?;
            // no linear columns, or none that any lambda would activate
            if !(lmax > 0.0) {
                return unpenalized();
            }
            lambda_grid(lmax, cfg.grid_size, cfg.grid_ratio)
        }
    };
    grid.sort_by(|a, b| b.total_cmp(a));
    let mut fits = Vec::with_capacity(grid.len());
    let mut hint: Vec<usize> = vec![];
    for &lambda in &grid {
        let spec = choice.at(lambda)?;
        let out = lla_on_design(frame, cfg, &weights.weights, &design, &spec, &hint)?;
        let fit = assemble(
            frame,
            cfg,
            weights,
            &design,
            &out.coef,
            out.loss,
            out.objective,
            Some(lambda),
            knots,
            out.trace,
        )?;
        hint = fit.active_set.clone();
        let too_dense = cfg.max_active.is_some_and(|k| fit.active_set.len() > k);
        fits.push(fit);
        if too_dense {
            break;
        }
    }
    Ok(fits)
}

/// Fits every (knots, lambda) pair and keeps the one with the smallest
/// criterion; ties go to fewer parameters, then to the smaller lambda.
pub fn select_fit(
    frame: &ModelFrame,
    cfg: &FitConfig,
    weights: &WeightEstimate,
) -> Result<FitResult> {
    cfg.validate()?;
    check_weights(frame, weights)?;
    let configs = cfg.knot_configs(frame.d())?;
    let paths: Vec<Vec<FitResult>> = configs
        .par_iter()
        .map(|k| path_for_knots(frame, cfg, weights, k))
        .collect::<Result<_>>()?;
    let mut table = Vec::new();
    let mut best: Option<FitResult> = None;
    let mut totals = LlaTrace::default();
    for fit in paths.into_iter().flatten() {
        totals.solves += fit.lla.solves;
        totals.uncertified_solves += fit.lla.uncertified_solves;
        totals.descent_violations += fit.lla.descent_violations;
        table.push(ScoreRow {
            lambda: fit.lambda,
            knots: fit.knots.clone(),
            nu: fit.nu,
            qbic: fit.qbic,
            active: fit.active_set.len(),
            lla_iterations: fit.lla.iterations,
            lla_converged: fit.lla.converged,
            descent_violations: fit.lla.descent_violations,
            solves: fit.lla.solves,
            uncertified_solves: fit.lla.uncertified_solves,
        });
        let better = match &best {
            None => true,
            Some(b) => {
                let key = |f: &FitResult| (f.qbic, f.nu, f.lambda.unwrap_or(0.0));
                let (q, v, l) = key(&fit);
                let (bq, bv, bl) = key(b);
                q < bq || (q == bq && (v < bv || (v == bv && l < bl)))
            }
        };
        if better {
            best = Some(fit);
        }
    }
    let mut best = best.ok_or_else(|| Error::Config("empty tuning grid".into()))?;
    log::debug!(
        "grid: {} fits, {} solves, {} uncertified, {} descent violations",
        table.len(),
        totals.solves,
        totals.uncertified_solves,
        totals.descent_violations
    );
    best.score_table = table;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipw::naive_weights;
    use approx::assert_abs_diff_eq;

    fn toy_frame(n: usize) -> ModelFrame {
        let x = DMatrix::from_fn(n, 3, |i, j| ((i * (j + 3) * 7 + j) as f64 * 0.731).sin());
        let z = DMatrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64);
        let y = DVector::from_fn(n, |i, _| {
            2.0 * x[(i, 0)] + (6.0 * z[(i, 0)]).sin() + 0.3 * ((i * 13) as f64 * 0.37).cos()
        });
        ModelFrame::new(
            y,
            x,
            z,
            "y",
            vec!["a".into(), "b".into(), "c".into()],
            vec!["z".into()],
            vec![],
            None,
        )
        .unwrap()
    }

    #[test]
    fn qbic_arithmetic() {
        let nu = effective_dof(3, &[1, 1], 3);
        assert_eq!(nu, 11);
        assert_abs_diff_eq!(
            qbic_score(10.0, 100, nu).unwrap(),
            10f64.ln() + 11.0 * 100f64.ln() / 200.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(qbic_score(10.0, 100, nu).unwrap(), 2.555869, epsilon = 1e-6);
        assert!(qbic_score(10.0, 100, 12).unwrap() > qbic_score(10.0, 100, 11).unwrap());
        assert!(matches!(qbic_score(0.0, 100, 1), Err(Error::ZeroLoss)));
    }

    #[test]
    fn knot_configs_cartesian() {
        let cfg = FitConfig { knot_grid: vec![vec![0, 1], vec![2]], ..FitConfig::default() };
        assert_eq!(cfg.knot_configs(2).unwrap(), vec![vec![0, 2], vec![1, 2]]);
        let cfg = FitConfig::default();
        assert_eq!(cfg.knot_configs(2).unwrap().len(), 9);
        assert_eq!(cfg.knot_configs(0).unwrap(), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn grid_is_log_spaced_and_descending() {
        let g = lambda_grid(2.0, 30, 1e-3);
        assert_eq!(g.len(), 30);
        assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[29], 2e-3, epsilon = 1e-12);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn lasso_needs_one_solve() {
        let f = toy_frame(80);
        let w = naive_weights(&f);
        let cfg = FitConfig {
            penalty: Some(PenaltyChoice::new(PenaltyFamily::Lasso)),
            ..FitConfig::default()
        };
        let fit = fit_lla(&f, &cfg, &w, &[1], 0.01).unwrap();
        assert_eq!(fit.lla.solves, 1);
    }

    #[test]
    fn lambda_max_zeroes_everything() {
        let f = toy_frame(80);
        let w = naive_weights(&f);
        let cfg = FitConfig::default();
        let design = fit_design(&f, &[1], 3).unwrap();
        let lmax = lambda_max(&f, &design, 0.5, &w.weights).unwrap();
        let at = fit_lla(&f, &cfg, &w, &[1], lmax * 1.0001).unwrap();
        assert!(at.active_set.is_empty());
        let below = fit_lla(&f, &cfg, &w, &[1], lmax * 0.9).unwrap();
        assert!(!below.active_set.is_empty());
    }

    #[test]
    fn scad_path_descends_and_selects_signal() {
        let f = toy_frame(150);
        let w = naive_weights(&f);
        let fit = select_fit(&f, &FitConfig::default(), &w).unwrap();
        assert!(fit.active_set.contains(&0));
        assert_eq!(fit.score_table.len(), 3 * DEFAULT_GRID_SIZE);
        assert_abs_diff_eq!(fit.beta[0], 2.0, epsilon = 0.2);
        for row in &fit.score_table {
            assert!(row.lla_converged);
        }
        assert_eq!(fit.lla.descent_violations, 0);
    }

    #[test]
    fn unpenalized_reduces_to_plain_solver() {
        let f = toy_frame(60);
        let w = naive_weights(&f);
        let cfg = FitConfig { penalty: None, ..FitConfig::default() };
        let fit = fit_unpenalized(&f, &cfg, &w, &[0]).unwrap();
        let design = fit_design(&f, &[0], 3).unwrap();
        let l1 = vec![0.0; design.matrix.ncols()];
        let p = QrProblem::new(&design.matrix, f.y(), 0.5, &w.weights, &l1).unwrap();
        let sol = qr::solve(&p).unwrap();
        assert_abs_diff_eq!(fit.loss, p.loss(&sol.coef), epsilon = 1e-10);
        let u = [0.3];
        let direct = fit.ghat(&u).unwrap();
        let mut row = vec![0.0; fit.basis.width()];
        fit.basis.row(&u, &mut row).unwrap();
        let manual: f64 = row.iter().zip(sol.coef.iter().skip(3)).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(direct, manual, epsilon = 1e-9);
    }
}
