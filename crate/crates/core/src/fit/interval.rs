//! Quantile prediction intervals scored on held-out rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::ModelFrame;
use crate::ipw::WeightConfig;

use super::{select_fit, wqbic_designate, Designation, FitConfig, FitResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntervalConfig {
    pub lo: f64,
    pub hi: f64,
    /// Tuning settings; `tau` is replaced by `lo` and `hi`.
    pub fit: FitConfig,
    pub weights: WeightConfig,
    /// Re-decide linear versus nonlinear roles at each quantile first.
    pub designate: bool,
}

impl Default for IntervalConfig {
    fn default() -> Self {
        IntervalConfig {
            lo: 0.05,
            hi: 0.95,
            fit: FitConfig::default(),
            weights: WeightConfig::default(),
            designate: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalReport {
    pub capture_rate: f64,
    pub mean_length: f64,
    pub sd_length: f64,
    /// Test rows where the lower quantile exceeded the upper one; these are
    /// scored with the ordered pair.
    pub crossings: usize,
    /// Complete test rows that were scored.
    pub scored: usize,
    pub designations_lo: Vec<Designation>,
    pub designations_hi: Vec<Designation>,
}

/// Fits one quantile on `train` and returns the fit together with the
/// test frame in the same role layout.
fn fit_quantile(
    train: &ModelFrame,
    test: &ModelFrame,
    tau: f64,
    cfg: &IntervalConfig,
) -> Result<(FitResult, ModelFrame, Vec<Designation>)> {
    let weights = cfg.weights.estimate(train, None)?;
    let fit_cfg = FitConfig { tau, ..cfg.fit.clone() };
    if !cfg.designate {
        return Ok((select_fit(train, &fit_cfg, &weights)?, test.clone(), vec![]));
    }
    let mut designations = Vec::new();
    let mut nonlinear = Vec::new();
    for c in 0..train.p() + train.d() {
        match wqbic_designate(train, c, tau, &weights) {
            Ok(d) => {
                if d.is_nonlinear() {
                    nonlinear.push(c);
                }
                designations.push(d);
            }
            // binary covariates stay linear
            Err(Error::Config(msg)) => log::info!("{msg}"),
            Err(e) => return Err(e),
        }
    }
    let train2 = train.with_roles(&nonlinear, None)?;
    let test2 = test.with_roles(&nonlinear, Some(train2.z_scales().to_vec()))?;
    let fit = select_fit(&train2, &fit_cfg, &weights)?;
    Ok((fit, test2, designations))
}

fn predict_row(fit: &FitResult, frame: &ModelFrame, i: usize) -> Result<f64> {
    let x: Vec<f64> = (0..frame.p()).map(|j| frame.x()[(i, j)]).collect();
    let z: Vec<f64> = (0..frame.d()).map(|j| frame.z_raw()[(i, j)]).collect();
    fit.predict(&x, &z)
}

/// Fits the `lo` and `hi` quantiles on `train` and scores the interval on
/// the complete rows of `test`.
pub fn prediction_interval(
    train: &ModelFrame,
    test: &ModelFrame,
    cfg: &IntervalConfig,
) -> Result<IntervalReport> {
    if !(cfg.lo > 0.0 && cfg.hi < 1.0 && cfg.lo <= cfg.hi) {
        return Err(Error::Config(format!(
            "need 0 < lo <= hi < 1, got {} and {}",
            cfg.lo, cfg.hi
        )));
    }
    if train.linear_names() != test.linear_names()
        || train.nonlinear_names() != test.nonlinear_names()
    {
        return Err(Error::Dimension("train and test columns differ".into()));
    }
    let (fit_lo, test_lo, designations_lo) = fit_quantile(train, test, cfg.lo, cfg)?;
    let (fit_hi, test_hi, designations_hi) = fit_quantile(train, test, cfg.hi, cfg)?;

    let mut lengths = Vec::new();
    let mut captured = 0usize;
    let mut crossings = 0usize;
    for i in (0..test.n()).filter(|&i| test.r()[i]) {
        let a = predict_row(&fit_lo, &test_lo, i)?;
        let b = predict_row(&fit_hi, &test_hi, i)?;
        let (q_lo, q_hi) = if a > b {
            crossings += 1;
            (b, a)
        } else {
            (a, b)
        };
        let y = test.y()[i];
        if q_lo <= y && y <= q_hi {
            captured += 1;
        }
        lengths.push(q_hi - q_lo);
    }
    let scored = lengths.len();
    if scored == 0 {
        return Err(Error::NoData);
    }
    let k = scored as f64;
    let mean_length = lengths.iter().sum::<f64>() / k;
    let sd_length = if scored > 1 {
        (lengths.iter().map(|l| (l - mean_length).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(IntervalReport {
        capture_rate: captured as f64 / k,
        mean_length,
        sd_length,
        crossings,
        scored,
        designations_lo,
        designations_hi,
    })
}
