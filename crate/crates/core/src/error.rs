use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: response is missing")]
    MissingResponse { row: usize },
    #[error("column `{0}` not found in header")]
    UnknownColumn(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("value {value} outside the domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no observation carries positive weight")]
    NoData,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("linear algebra failure: {0}")]
    Singular(String),
    #[error("interior-point solver did not converge after {iterations} iterations (gap {gap:e})")]
    SolverStalled { iterations: usize, gap: f64 },
    #[error("logistic fit did not converge after {iterations} iterations (score norm {score_norm:e})")]
    LogisticStalled { iterations: usize, score_norm: f64 },
    #[error("logistic likelihood is degenerate: {0}")]
    Separation(String),
    #[error("quantile loss is zero; information criterion undefined")]
    ZeroLoss,
}

pub type Result<T> = std::result::Result<T, Error>;
