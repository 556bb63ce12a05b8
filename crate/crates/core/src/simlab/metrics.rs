//! Per-replication scores and their Monte-Carlo aggregates.

use serde::Serialize;

use crate::fit::FitResult;
use crate::frame::{complete_case_count, ModelFrame};

use super::{Method, Truth};

#[derive(Debug, Clone, Serialize)]
pub struct RepMetrics {
    pub replication: u64,
    pub method: Method,
    pub complete: usize,
    pub tv: usize,
    pub fv: usize,
    pub exact: bool,
    pub beta: Vec<f64>,
    pub aade: f64,
    pub nu: usize,
    pub lambda: Option<f64>,
    pub knots: Vec<usize>,
    /// Fits on the tuning grid.
    pub fits: usize,
    pub nonconverged: usize,
    pub descent_violations: usize,
    pub solves: usize,
    pub uncertified: usize,
    pub capped: usize,
    pub error: Option<String>,
}

impl RepMetrics {
    pub fn failed(replication: u64, method: Method, error: String) -> Self {
        RepMetrics {
            replication,
            method,
            complete: 0,
            tv: 0,
            fv: 0,
            exact: false,
            beta: vec![],
            aade: f64::NAN,
            nu: 0,
            lambda: None,
            knots: vec![],
            fits: 0,
            nonconverged: 0,
            descent_violations: 0,
            solves: 0,
            uncertified: 0,
            capped: 0,
            error: Some(error),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub(crate) fn flat(&self) -> RepRow {
        let join = |v: Vec<String>| v.join(";");
        RepRow {
            replication: self.replication,
            method: self.method.label(),
            complete: self.complete,
            tv: self.tv,
            fv: self.fv,
            exact: self.exact,
            aade: self.aade,
            nu: self.nu,
            lambda: self.lambda,
            knots: join(self.knots.iter().map(|k| k.to_string()).collect()),
            beta: join(self.beta.iter().map(|b| format!("{b}")).collect()),
            fits: self.fits,
            nonconverged: self.nonconverged,
            descent_violations: self.descent_violations,
            solves: self.solves,
            uncertified: self.uncertified,
            capped: self.capped,
            error: self.error.clone().unwrap_or_default(),
        }
    }
}

#[derive(Serialize)]
pub(crate) struct RepRow {
    replication: u64,
    method: &'static str,
    complete: usize,
    tv: usize,
    fv: usize,
    exact: bool,
    aade: f64,
    nu: usize,
    lambda: Option<f64>,
    knots: String,
    beta: String,
    fits: usize,
    nonconverged: usize,
    descent_violations: usize,
    solves: usize,
    uncertified: usize,
    capped: usize,
    error: String,
}

/// Scores a selected fit against the truth. `ĝ` is compared with `g_0` on
/// every row, using the fully observed nonlinear covariates mapped through
/// the frame's scaling.
pub fn score_replication(
    truth: &Truth,
    frame: &ModelFrame,
    fit: &FitResult,
    method: Method,
    capped: usize,
) -> RepMetrics {
    let active = &fit.active_set;
    let tv = active.iter().filter(|j| truth.support.contains(j)).count();
    let fv = active.len() - tv;
    let exact = tv == truth.support.len() && fv == 0;
    let n = truth.g0.len();
    let scales = frame.z_scales();
    let aade = (0..n)
        .map(|i| {
            let u: Vec<f64> = (0..truth.z.ncols())
                .map(|j| scales[j].apply(truth.z[(i, j)]).0)
                .collect();
            let g = fit.ghat(&u).unwrap_or(f64::NAN);
            (g - truth.g0[i]).abs()
        })
        .sum::<f64>()
        / n as f64;
    let table = &fit.score_table;
    RepMetrics {
        replication: 0,
        method,
        complete: complete_case_count(frame),
        tv,
        fv,
        exact,
        beta: fit.beta.iter().copied().collect(),
        aade,
        nu: fit.nu,
        lambda: fit.lambda,
        knots: fit.knots.clone(),
        fits: table.len(),
        nonconverged: table.iter().filter(|r| !r.lla_converged).count(),
        descent_violations: table.iter().map(|r| r.descent_violations).sum(),
        solves: table.iter().map(|r| r.solves).sum(),
        uncertified: table.iter().map(|r| r.uncertified_solves).sum(),
        capped,
        error: None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replications: usize,
    pub failures: usize,
    pub r_n: f64,
    pub tv: f64,
    pub fv: f64,
    pub true_rate: f64,
    /// `Σ_j |mean_m β̂_j − β_j0|`.
    pub bias: f64,
    /// Mean over replications of `Σ_j (β̂_j − β_j0)²`.
    pub mse: f64,
    pub aade: f64,
    pub se_tv: f64,
    pub se_fv: f64,
    pub se_true: f64,
    /// `sqrt(Σ_j var(β̂_j) / R)`, the standard error of the summed means.
    pub se_bias: f64,
    pub se_mse: f64,
    pub se_aade: f64,
    pub fits: usize,
    pub nonconverged: usize,
    pub descent_violations: usize,
    pub solves: usize,
    pub uncertified: usize,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Aggregates the successful replications of one method.
pub fn summarize(method: Method, rows: &[&RepMetrics], beta0: &[f64]) -> MethodSummary {
    let ok: Vec<&&RepMetrics> = rows.iter().filter(|r| r.ok()).collect();
    let failures = rows.len() - ok.len();
    let col = |f: &dyn Fn(&RepMetrics) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let (r_n, _) = mean_se(&col(&|r| r.complete as f64));
    let (tv, se_tv) = mean_se(&col(&|r| r.tv as f64));
    let (fv, se_fv) = mean_se(&col(&|r| r.fv as f64));
    let (true_rate, se_true) = mean_se(&col(&|r| f64::from(u8::from(r.exact))));
    let (aade, se_aade) = mean_se(&col(&|r| r.aade));
    let (mse, se_mse) = mean_se(&col(&|r| {
        r.beta.iter().zip(beta0).map(|(b, t)| (b - t).powi(2)).sum()
    }));
    let mut bias = 0.0;
    let mut var_sum = 0.0;
    for (j, b0) in beta0.iter().enumerate() {
        let (m, se) = mean_se(&col(&|r| r.beta[j]));
        bias += (m - b0).abs();
        var_sum += se * se;
    }
    let total = |f: &dyn Fn(&RepMetrics) -> usize| ok.iter().map(|r| f(r)).sum::<usize>();
    if failures * 100 > rows.len() {
        log::warn!("{}: {failures} of {} replications failed", method.label(), rows.len());
    }
    MethodSummary {
        method,
        replications: ok.len(),
        failures,
        r_n,
        tv,
        fv,
        true_rate,
        bias,
        mse,
        aade,
        se_tv,
        se_fv,
        se_true,
        se_bias: var_sum.sqrt(),
        se_mse,
        se_aade,
        fits: total(&|r| r.fits),
        nonconverged: total(&|r| r.nonconverged),
        descent_violations: total(&|r| r.descent_violations),
        solves: total(&|r| r.solves),
        uncertified: total(&|r| r.uncertified),
    }
}

#[derive(Serialize)]
pub(crate) struct SummaryRow {
    method: &'static str,
    n: usize,
    r_n: f64,
    tv: f64,
    fv: f64,
    true_rate: f64,
    bias: f64,
    mse: f64,
    aade: f64,
    se_tv: f64,
    se_fv: f64,
    se_true: f64,
    se_bias: f64,
    se_mse: f64,
    se_aade: f64,
    replications: usize,
    failures: usize,
    fits: usize,
    nonconverged: usize,
    descent_violations: usize,
    uncertified: usize,
}

impl MethodSummary {
    pub(crate) fn flat(&self, n: usize) -> SummaryRow {
        SummaryRow {
            method: self.method.label(),
            n,
            r_n: self.r_n,
            tv: self.tv,
            fv: self.fv,
            true_rate: self.true_rate,
            bias: self.bias,
            mse: self.mse,
            aade: self.aade,
            se_tv: self.se_tv,
            se_fv: self.se_fv,
            se_true: self.se_true,
            se_bias: self.se_bias,
            se_mse: self.se_mse,
            se_aade: self.se_aade,
            replications: self.replications,
            failures: self.failures,
            fits: self.fits,
            nonconverged: self.nonconverged,
            descent_violations: self.descent_violations,
            uncertified: self.uncertified,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(beta: Vec<f64>, exact: bool) -> RepMetrics {
        let mut r = RepMetrics::failed(0, Method::Kernel, String::new());
        r.error = None;
        r.beta = beta;
        r.exact = exact;
        r.tv = 3;
        r.aade = 0.0;
        r
    }

    #[test]
    fn perfect_recovery_scores_zero() {
        let b = vec![1.0, 0.0, -1.0, 1.0];
        let rows = [row(b.clone(), true), row(b.clone(), true)];
        let refs: Vec<&RepMetrics> = rows.iter().collect();
        let s = summarize(Method::Kernel, &refs, &b);
        assert_eq!(s.bias, 0.0);
        assert_eq!(s.mse, 0.0);
        assert_eq!(s.true_rate, 1.0);
        assert_eq!(s.tv, 3.0);
    }

    #[test]
    fn bias_uses_mean_before_absolute_value() {
        let b0 = vec![1.0];
        let rows = [row(vec![1.5], false), row(vec![0.5], false)];
        let refs: Vec<&RepMetrics> = rows.iter().collect();
        let s = summarize(Method::Naive, &refs, &b0);
        assert_eq!(s.bias, 0.0);
        assert_eq!(s.mse, 0.25);
    }

    #[test]
    fn failures_are_excluded() {
        let b0 = vec![1.0];
        let rows = [row(vec![1.0], true), RepMetrics::failed(1, Method::Naive, "x".into())];
        let refs: Vec<&RepMetrics> = rows.iter().collect();
        let s = summarize(Method::Naive, &refs, &b0);
        assert_eq!((s.replications, s.failures), (1, 1));
    }
}
