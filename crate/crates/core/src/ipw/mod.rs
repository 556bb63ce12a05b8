//! Inverse-probability weights for complete cases.
//!
//! All estimators work on the always-observed block `t` of a
//! [`ModelFrame`](crate::frame::ModelFrame): column 0 is the response and the
//! remaining columns are fully observed covariates. Column subsets passed
//! around here index that block.

pub mod logistic;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::frame::ModelFrame;
use crate::splines::SplineBasis;

pub use logistic::{fit_logistic, null_deviance, LogisticFit};

/// Weights above this value are truncated.
pub const DEFAULT_CAP: f64 = 25.0;
/// Family-wise level of the screening tests.
pub const DEFAULT_SCREEN_ALPHA: f64 = 0.05;
/// Internal knots used when screening candidates nonparametrically.
const SCREEN_SPLINE_KNOTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMethod {
    True,
    Parametric,
    Kernel,
    /// Complete-case analysis: weight `r_i`.
    #[serde(alias = "naive")]
    None,
}

impl WeightMethod {
    pub fn label(self) -> &'static str {
        match self {
            WeightMethod::True => "true",
            WeightMethod::Parametric => "parametric",
            WeightMethod::Kernel => "kernel",
            WeightMethod::None => "naive",
        }
    }
}

impl std::str::FromStr for WeightMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "true" | "oracle" => Ok(WeightMethod::True),
            "parametric" => Ok(WeightMethod::Parametric),
            "kernel" => Ok(WeightMethod::Kernel),
            "naive" | "none" => Ok(WeightMethod::None),
            other => Err(Error::Config(format!("unknown weight method `{other}`"))),
        }
    }
}

impl std::fmt::Display for WeightMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightEstimate {
    /// Estimated probability of being a complete case.
    pub pi: Vec<f64>,
    /// `r_i / π_i`, truncated at `cap`; exactly zero for incomplete rows.
    pub weights: Vec<f64>,
    pub method: WeightMethod,
    pub cap: f64,
    pub capped_count: usize,
    pub eta_hat: Option<Vec<f64>>,
    /// Per-dimension kernel bandwidths.
    pub bandwidth: Option<Vec<f64>>,
    pub screen_set: Vec<usize>,
}

fn capped(pi: &[f64], r: &[bool], cap: f64) -> (Vec<f64>, usize) {
    let mut count = 0;
    let w = pi
        .iter()
        .zip(r)
        .map(|(&p, &ri)| {
            if !ri {
                return 0.0;
            }
            let raw = 1.0 / p;
            if raw > cap {
                count += 1;
                cap
            } else {
                raw
            }
        })
        .collect();
    (w, count)
}

fn check_cap(cap: f64) -> Result<()> {
    if cap.is_nan() || cap < 1.0 {
        return Err(Error::Config(format!("weight cap must be >= 1, got {cap}")));
    }
    Ok(())
}

fn check_columns(frame: &ModelFrame, columns: &[usize]) -> Result<()> {
    let s = frame.t().ncols();
    match columns.iter().find(|&&c| c >= s) {
        Some(c) => Err(Error::Dimension(format!(
            "always-observed column {c} out of range (have {s})"
        ))),
        None => Ok(()),
    }
}

/// Complete-case weights `r_i`.
pub fn naive_weights(frame: &ModelFrame) -> WeightEstimate {
    WeightEstimate {
        pi: vec![1.0; frame.n()],
        weights: frame.r_weights(),
        method: WeightMethod::None,
        cap: f64::INFINITY,
        capped_count: 0,
        eta_hat: None,
        bandwidth: None,
        screen_set: vec![],
    }
}

/// Weights from known probabilities `pi0`.
pub fn true_weights(frame: &ModelFrame, pi0: &[f64], cap: f64) -> Result<WeightEstimate> {
    check_cap(cap)?;
    if pi0.len() != frame.n() {
        return Err(Error::Dimension(format!(
            "{} probabilities for {} rows",
            pi0.len(),
            frame.n()
        )));
    }
    // a zero probability is only impossible on an observed row
    let bad = pi0
        .iter()
        .zip(frame.r())
        .find(|(p, &r)| !(**p >= 0.0 && **p <= 1.0) || (r && **p == 0.0));
    if let Some((&value, _)) = bad {
        return Err(Error::Domain { value, lo: 0.0, hi: 1.0 });
    }
    let (weights, capped_count) = capped(pi0, frame.r(), cap);
    Ok(WeightEstimate {
        pi: pi0.to_vec(),
        weights,
        method: WeightMethod::True,
        cap,
        capped_count,
        eta_hat: None,
        bandwidth: None,
        screen_set: vec![],
    })
}

fn with_intercept(frame: &ModelFrame, columns: &[usize]) -> DMatrix<f64> {
    let t = frame.t();
    DMatrix::from_fn(frame.n(), columns.len() + 1, |i, k| {
        if k == 0 {
            1.0
        } else {
            t[(i, columns[k - 1])]
        }
    })
}

/// Logistic model of `r` on `[1, t_columns]`.
pub fn fit_parametric_weights(
    frame: &ModelFrame,
    columns: &[usize],
    cap: f64,
) -> Result<WeightEstimate> {
    check_cap(cap)?;
    check_columns(frame, columns)?;
    let design = with_intercept(frame, columns);
    let fit = fit_logistic(&design, frame.r())?;
    let pi: Vec<f64> = fit.fitted.iter().copied().collect();
    let (weights, capped_count) = capped(&pi, frame.r(), cap);
    Ok(WeightEstimate {
        pi,
        weights,
        method: WeightMethod::Parametric,
        cap,
        capped_count,
        eta_hat: Some(fit.coef.iter().copied().collect()),
        bandwidth: None,
        screen_set: columns.to_vec(),
    })
}

/// Per-dimension default bandwidths `σ̂_k n^{-1/(s+2)}`.
pub fn default_bandwidths(frame: &ModelFrame, columns: &[usize]) -> Vec<f64> {
    let n = frame.n() as f64;
    let s = columns.len() as f64;
    let rate = n.powf(-1.0 / (s + 2.0));
    columns
        .iter()
        .map(|&c| {
            let col = frame.t().column(c);
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let sd = var.sqrt();
            // a constant column contributes nothing to the kernel anyway
            if sd > 0.0 {
                sd * rate
            } else {
                1.0
            }
        })
        .collect()
}

/// Nadaraya-Watson smoother of `r` on `t_columns` with a Gaussian product
/// kernel. `bandwidth`, if given, is used for every dimension. With no
/// columns, every probability is the complete-case fraction.
pub fn fit_kernel_weights(
    frame: &ModelFrame,
    columns: &[usize],
    bandwidth: Option<f64>,
    cap: f64,
) -> Result<WeightEstimate> {
    check_cap(cap)?;
    check_columns(frame, columns)?;
    let n = frame.n();
    let h: Vec<f64> = match bandwidth {
        Some(b) if b > 0.0 && b.is_finite() => vec![b; columns.len()],
        Some(b) => return Err(Error::Config(format!("bandwidth must be positive, got {b}"))),
        None => default_bandwidths(frame, columns),
    };
    let t = frame.t();
    let scaled: Vec<Vec<f64>> = (0..n)
        .map(|i| columns.iter().zip(&h).map(|(&c, hk)| t[(i, c)] / hk).collect())
        .collect();
    let r = frame.r();
    let pi: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..n {
                let d2: f64 = scaled[i]
                    .iter()
                    .zip(&scaled[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                // the j = i term has exponent 0, so the denominator is >= 1
                let k = (-0.5 * d2).exp();
                den += k;
                if r[j] {
                    num += k;
                }
            }
            (num / den).max(f64::MIN_POSITIVE)
        })
        .collect();
    if pi.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("kernel probability"));
    }
    let (weights, capped_count) = capped(&pi, r, cap);
    Ok(WeightEstimate {
        pi,
        weights,
        method: WeightMethod::Kernel,
        cap,
        capped_count,
        eta_hat: None,
        bandwidth: Some(h),
        screen_set: columns.to_vec(),
    })
}

/// Cubic B-spline expansion of a column rescaled to `[0, 1]`, without the
/// columns that vanish on every row. `None` for a constant column.
fn spline_expand(values: &[f64]) -> Option<DMatrix<f64>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    let u: Vec<f64> = values.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect();
    let basis = SplineBasis::from_quantiles(3, SCREEN_SPLINE_KNOTS, &u).ok()?;
    let rows: Vec<Vec<f64>> = u.iter().map(|&v| basis.evaluate(v).ok()).collect::<Option<_>>()?;
    let keep: Vec<usize> = (0..basis.width())
        .filter(|&k| rows.iter().any(|row| row[k] != 0.0))
        .collect();
    Some(DMatrix::from_fn(values.len(), keep.len(), |i, k| rows[i][keep[k]]))
}

/// Likelihood-ratio screening of the always-observed columns, one
/// univariate logistic model per candidate, Bonferroni-corrected at `alpha`.
/// Candidates whose model separates the data are skipped.
pub fn screen_missing_model(
    frame: &ModelFrame,
    nonparametric: bool,
    alpha: f64,
) -> Result<Vec<usize>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain { value: alpha, lo: 0.0, hi: 1.0 });
    }
    let r = frame.r();
    let complete = r.iter().filter(|&&v| v).count();
    if complete == 0 || complete == r.len() {
        log::info!("complete-case indicator is constant; screening selects nothing");
        return Ok(vec![]);
    }
    let t = frame.t();
    let k = t.ncols();
    let level = alpha / k as f64;
    let null = null_deviance(r);
    let n = frame.n();
    let mut selected = Vec::new();
    for c in 0..k {
        let col: Vec<f64> = t.column(c).iter().copied().collect();
        let terms = if nonparametric {
            match spline_expand(&col) {
                Some(m) => m,
                None => continue,
            }
        } else {
            DMatrix::from_column_slice(n, 1, &col)
        };
        if terms.ncols() == 0 {
            continue;
        }
        let design = DMatrix::from_fn(n, terms.ncols() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                terms[(i, j - 1)]
            }
        });
        let fit = match fit_logistic(&design, r) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("screening skips `{}`: {e}", frame.t_name(c));
                continue;
            }
        };
        let stat = (null - fit.deviance).max(0.0);
        let dist = ChiSquared::new(terms.ncols() as f64)
            .map_err(|e| Error::Config(format!("chi-squared: {e}")))?;
        let p_value = dist.sf(stat);
        log::debug!("screen `{}`: LR {stat:.3}, p {p_value:.3e}", frame.t_name(c));
        if p_value < level {
            selected.push(c);
        }
    }
    Ok(selected)
}

/// Screens (unless `columns` is given) and estimates weights by `method`.
/// `pi0` is required for [`WeightMethod::True`]. An empty screened set gives
/// constant probabilities equal to the complete-case fraction.
#[allow(clippy::too_many_arguments)]
pub fn estimate_weights(
    frame: &ModelFrame,
    method: WeightMethod,
    columns: Option<&[usize]>,
    nonparametric_screen: bool,
    screen_alpha: f64,
    bandwidth: Option<f64>,
    cap: f64,
    pi0: Option<&[f64]>,
) -> Result<WeightEstimate> {
    let screened = |nonpar: bool| -> Result<Vec<usize>> {
        match columns {
            Some(c) => Ok(c.to_vec()),
            None => screen_missing_model(frame, nonpar, screen_alpha),
        }
    };
    match method {
        WeightMethod::None => Ok(naive_weights(frame)),
        WeightMethod::True => {
            let pi0 = pi0.ok_or_else(|| Error::Config("true weights need known probabilities".into()))?;
            true_weights(frame, pi0, cap)
        }
        WeightMethod::Parametric => {
            let cols = screened(false)?;
            if cols.is_empty() {
                return constant_weights(frame, method, cap);
            }
            fit_parametric_weights(frame, &cols, cap)
        }
        WeightMethod::Kernel => {
            let cols = screened(nonparametric_screen)?;
            if cols.is_empty() {
                return constant_weights(frame, method, cap);
            }
            fit_kernel_weights(frame, &cols, bandwidth, cap)
        }
    }
}

/// Everything needed to produce weights for a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightConfig {
    pub method: WeightMethod,
    /// Spline-expand candidates during screening; `None` does so for kernel
    /// weights only.
    pub nonparametric_screen: Option<bool>,
    pub screen_alpha: f64,
    pub bandwidth: Option<f64>,
    pub cap: f64,
    /// Fixed always-observed columns; skips screening.
    pub columns: Option<Vec<usize>>,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            method: WeightMethod::Kernel,
            nonparametric_screen: None,
            screen_alpha: DEFAULT_SCREEN_ALPHA,
            bandwidth: None,
            cap: DEFAULT_CAP,
            columns: None,
        }
    }
}

impl WeightConfig {
    pub fn with_method(method: WeightMethod) -> Self {
        WeightConfig { method, ..WeightConfig::default() }
    }

    pub fn estimate(&self, frame: &ModelFrame, pi0: Option<&[f64]>) -> Result<WeightEstimate> {
        estimate_weights(
            frame,
            self.method,
            self.columns.as_deref(),
            self.nonparametric_screen
                .unwrap_or(self.method == WeightMethod::Kernel),
            self.screen_alpha,
            self.bandwidth,
            self.cap,
            pi0,
        )
    }
}

fn constant_weights(frame: &ModelFrame, method: WeightMethod, cap: f64) -> Result<WeightEstimate> {
    check_cap(cap)?;
    let r = frame.r();
    let k = r.iter().filter(|&&v| v).count();
    if k == 0 {
        return Err(Error::NoData);
    }
    let p = k as f64 / r.len() as f64;
    let pi = vec![p; r.len()];
    let (weights, capped_count) = capped(&pi, r, cap);
    Ok(WeightEstimate {
        pi,
        weights,
        method,
        cap,
        capped_count,
        eta_hat: None,
        bandwidth: None,
        screen_set: vec![],
    })
}
