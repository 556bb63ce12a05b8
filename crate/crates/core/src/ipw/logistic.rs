//! Binary logistic regression by Newton-Raphson.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{spd_solve, weighted_gram};

const SCORE_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
/// Deviance below this means the classes are perfectly separated.
const SEPARATION_DEV: f64 = 1e-6;
/// Linear predictors this large at the iteration limit mean some fitted
/// probabilities diverge to 0 or 1.
const DIVERGENT_ETA: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coef: DVector<f64>,
    pub fitted: DVector<f64>,
    pub deviance: f64,
    pub iterations: usize,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^v)` without overflow.
fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn deviance(design: &DMatrix<f64>, r: &[bool], coef: &DVector<f64>) -> f64 {
    let eta = design * coef;
    2.0 * eta
        .iter()
        .zip(r)
        .map(|(&e, &ri)| softplus(e) - if ri { e } else { 0.0 })
        .sum::<f64>()
}

/// Deviance of the intercept-only model.
pub fn null_deviance(r: &[bool]) -> f64 {
    let n = r.len() as f64;
    let k = r.iter().filter(|&&v| v).count() as f64;
    let term = |c: f64| if c > 0.0 { c * (c / n).ln() } else { 0.0 };
    -2.0 * (term(k) + term(n - k))
}

/// Maximum-likelihood fit of `P(r = 1) = logistic(design · η)`. The design
/// should already contain an intercept column.
pub fn fit_logistic(design: &DMatrix<f64>, r: &[bool]) -> Result<LogisticFit> {
    let n = design.nrows();
    if r.len() != n {
        return Err(Error::Dimension("response length".into()));
    }
    let ones = r.iter().filter(|&&v| v).count();
    if ones == 0 || ones == n {
        return Err(Error::Separation(
            "indicator is constant, nothing to model".into(),
        ));
    }
    let target = DVector::from_iterator(n, r.iter().map(|&v| if v { 1.0 } else { 0.0 }));
    let mut coef = DVector::zeros(design.ncols());
    let mut dev = deviance(design, r, &coef);
    let mut score_norm = f64::INFINITY;
    for it in 0..MAX_ITER {
        let eta = design * &coef;
        if dev < SEPARATION_DEV {
            return Err(Error::Separation("the classes are perfectly separated".into()));
        }
        let fitted = eta.map(sigmoid);
        let score = design.tr_mul(&(&target - &fitted));
        score_norm = score.amax();
        if score_norm <= SCORE_TOL {
            return Ok(LogisticFit { coef, fitted, deviance: dev, iterations: it });
        }
        let w: Vec<f64> = fitted.iter().map(|p| p * (1.0 - p)).collect();
        let step = spd_solve(&weighted_gram(design, &w), &score)?;
        // step halving keeps the deviance monotone
        let mut t = 1.0;
        loop {
            let trial = &coef + t * &step;
            let trial_dev = deviance(design, r, &trial);
            if trial_dev <= dev + 1e-12 * (1.0 + dev) || t < 1e-10 {
                coef = trial;
                dev = trial_dev;
                break;
            }
            t *= 0.5;
        }
    }
    let eta = design * &coef;
    if eta.amax() > DIVERGENT_ETA {
        return Err(Error::Separation(format!(
            "fitted probabilities diverge to 0 or 1 (|eta| = {:.1})",
            eta.amax()
        )));
    }
    Err(Error::LogisticStalled { iterations: MAX_ITER, score_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn intercept_only_recovers_proportion() {
        let r = [true, true, true, false];
        let x = DMatrix::from_element(4, 1, 1.0);
        let fit = fit_logistic(&x, &r).unwrap();
        assert_abs_diff_eq!(fit.fitted[0], 0.75, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.deviance, null_deviance(&r), epsilon = 1e-10);
    }

    #[test]
    fn separated_data_is_rejected() {
        let r = [false, false, true, true];
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        assert!(matches!(fit_logistic(&x, &r), Err(Error::Separation(_))));
    }

    #[test]
    fn overlapping_data_converges() {
        let r = [false, true, false, true, true, false];
        let x = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0, 1.0, 5.0]);
        let fit = fit_logistic(&x, &r).unwrap();
        let target = DVector::from_iterator(6, r.iter().map(|&v| v as u8 as f64));
        let score = x.tr_mul(&(target - &fit.fitted));
        assert!(score.amax() <= 1e-8);
    }
}
