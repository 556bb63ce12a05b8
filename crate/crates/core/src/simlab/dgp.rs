//! Synthetic partially linear data with covariates missing at random.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::frame::ModelFrame;

/// Correlation between neighbouring Gaussian covariates.
const AR_RHO: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorModel {
    /// Student t with 3 degrees of freedom.
    T3,
    /// `(1 + x_u) ξ` with `ξ` standard normal.
    Hetero,
}

impl ErrorModel {
    pub fn default_tau(self) -> f64 {
        match self {
            ErrorModel::T3 => 0.5,
            ErrorModel::Hetero => 0.7,
        }
    }

    /// `τ`-quantile of the standardized error law.
    pub fn quantile(self, tau: f64) -> f64 {
        match self {
            ErrorModel::T3 => StudentsT::new(0.0, 1.0, 3.0).expect("valid").inverse_cdf(tau),
            ErrorModel::Hetero => Normal::new(0.0, 1.0).expect("valid").inverse_cdf(tau),
        }
    }
}

impl std::str::FromStr for ErrorModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t3" => Ok(ErrorModel::T3),
            "hetero" | "heteronormal" => Ok(ErrorModel::Hetero),
            other => Err(Error::Config(format!("unknown error model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MissingModel {
    /// `logit = 1 + 2y − 5x2 + 5x4 − 2z1`.
    #[serde(rename = "1")]
    Model1,
    /// `logit = −2 + y³ + x3²`.
    #[serde(rename = "2")]
    Model2,
}

impl MissingModel {
    fn logit(self, y: f64, x: &[f64], z1: f64) -> f64 {
        match self {
            MissingModel::Model1 => 1.0 + 2.0 * y - 5.0 * x[1] + 5.0 * x[3] - 2.0 * z1,
            MissingModel::Model2 => -2.0 + y.powi(3) + x[2] * x[2],
        }
    }
}

impl std::str::FromStr for MissingModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(MissingModel::Model1),
            "2" => Ok(MissingModel::Model2),
            other => Err(Error::Config(format!("unknown missing model `{other}`"))),
        }
    }
}

/// What generated one replication.
#[derive(Debug, Clone)]
pub struct Truth {
    pub tau: f64,
    /// True linear coefficients at `tau`.
    pub beta: DVector<f64>,
    /// Indices of the nonzero entries of `beta`.
    pub support: Vec<usize>,
    /// Complete-case probabilities.
    pub pi: Vec<f64>,
    /// Fully observed nonlinear covariates.
    pub z: DMatrix<f64>,
    /// `g_0(z_i)` including the quantile intercept.
    pub g0: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Replication {
    /// Observed data: `x1`, `x7` and `z2` are blanked for incomplete rows.
    pub frame: ModelFrame,
    /// The same rows before blanking.
    pub full: ModelFrame,
    pub truth: Truth,
}

pub fn linear_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// `sin(2π z1) + z2³` plus the error quantile.
pub fn true_g0(z1: f64, z2: f64, intercept: f64) -> f64 {
    (2.0 * PI * z1).sin() + z2.powi(3) + intercept
}

/// Counter-based stream for replication `rep` under `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Draws one data set of `n` rows with `p` linear covariates (the last one
/// uniform on `[0, √12]`, the rest AR(1) Gaussian).
pub fn generate(
    n: usize,
    p: usize,
    tau: f64,
    error: ErrorModel,
    missing: MissingModel,
    rng: &mut impl Rng,
) -> Result<Replication> {
    if p < 8 {
        return Err(Error::Config(format!("need at least 8 linear covariates, got {p}")));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain { value: tau, lo: 0.0, hi: 1.0 });
    }
    let t3 = StudentT::new(3.0).expect("valid");
    let innov = (1.0 - AR_RHO * AR_RHO).sqrt();
    let sqrt12 = 12f64.sqrt();
    let q = error.quantile(tau);

    let mut x = DMatrix::zeros(n, p);
    let mut z = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    let mut pi = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    let mut row = vec![0.0; p];
    for i in 0..n {
        let mut prev: f64 = rng.sample(StandardNormal);
        row[0] = prev;
        for v in row.iter_mut().take(p - 1).skip(1) {
            let e: f64 = rng.sample(StandardNormal);
            prev = AR_RHO * prev + innov * e;
            *v = prev;
        }
        row[p - 1] = rng.gen_range(0.0..sqrt12);
        let z1: f64 = rng.gen_range(0.0..1.0);
        let z2: f64 = rng.gen_range(-1.0..1.0);
        let eps = match error {
            ErrorModel::T3 => t3.sample(rng),
            ErrorModel::Hetero => {
                let xi: f64 = rng.sample(StandardNormal);
                (1.0 + row[p - 1]) * xi
            }
        };
        let yi = row[0] - row[2] + row[p - 1] + true_g0(z1, z2, 0.0) + eps;
        let prob = logistic(missing.logit(yi, &row, z1));
        let complete = rng.gen::<f64>() < prob;
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
        z[(i, 0)] = z1;
        z[(i, 1)] = z2;
        y[i] = yi;
        pi.push(prob);
        r.push(complete);
    }

    let mut beta = DVector::zeros(p);
    beta[0] = 1.0;
    beta[2] = -1.0;
    beta[p - 1] = match error {
        ErrorModel::T3 => 1.0,
        ErrorModel::Hetero => 1.0 + q,
    };
    let intercept = q;
    let g0 = (0..n).map(|i| true_g0(z[(i, 0)], z[(i, 1)], intercept)).collect();

    let names = linear_names(p);
    let nonlinear = vec!["z1".to_string(), "z2".to_string()];
    // x1, x7 and z2 share one missingness indicator
    let missing_capable = vec![0, 6, p + 1];
    let mut xo = x.clone();
    let mut zo = z.clone();
    for i in (0..n).filter(|&i| !r[i]) {
        xo[(i, 0)] = f64::NAN;
        xo[(i, 6)] = f64::NAN;
        zo[(i, 1)] = f64::NAN;
    }
    let frame = ModelFrame::new(
        y.clone(),
        xo,
        zo,
        "y",
        names.clone(),
        nonlinear.clone(),
        missing_capable.clone(),
        None,
    )?;
    let full = ModelFrame::new(y, x, z.clone(), "y", names, nonlinear, missing_capable, None)?;
    Ok(Replication {
        frame,
        full,
        truth: Truth {
            tau,
            support: vec![0, 2, p - 1],
            beta,
            pi: pi.clone(),
            z,
            g0,
        },
    })
}
