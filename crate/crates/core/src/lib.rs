//! Inverse-probability-weighted penalized partially linear additive quantile
//! regression with missing covariates.

pub mod error;
pub mod fit;
pub mod frame;
pub mod ipw;
pub mod linalg;
pub mod penalty;
pub mod qr;
pub mod simlab;
pub mod splines;

pub use error::{Error, Result};
