//! Monte-Carlo experiments comparing full-data, complete-case and weighted
//! penalized fits on synthetic data.

pub mod dgp;
mod metrics;

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{select_fit, FitConfig};
use crate::ipw::{naive_weights, true_weights, WeightConfig, WeightMethod, DEFAULT_CAP};

pub use dgp::{generate, replication_rng, ErrorModel, MissingModel, Replication, Truth};
pub use metrics::{score_replication, summarize, MethodSummary, RepMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Penalized fit on the data before blanking.
    Full,
    Naive,
    Parametric,
    Kernel,
    /// Weights from the generating probabilities.
    True,
}

impl Method {
    pub const STANDARD: [Method; 4] = [Method::Full, Method::Naive, Method::Parametric, Method::Kernel];

    pub fn label(self) -> &'static str {
        match self {
            Method::Full => "Full",
            Method::Naive => "Naive",
            Method::Parametric => "P Wt",
            Method::Kernel => "K Wt",
            Method::True => "True Wt",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Method::Full),
            "naive" => Ok(Method::Naive),
            "parametric" | "p" => Ok(Method::Parametric),
            "kernel" | "k" => Ok(Method::Kernel),
            "true" => Ok(Method::True),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    /// Defaults to 0.5 for t errors and 0.7 for heteroskedastic errors.
    pub tau: Option<f64>,
    pub error_model: ErrorModel,
    pub missing_model: MissingModel,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Penalty, grids and LLA settings; `tau` here is ignored.
    pub fit: FitConfig,
    pub cap: f64,
    pub screen_alpha: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 400,
            p: 8,
            tau: None,
            error_model: ErrorModel::T3,
            missing_model: MissingModel::Model1,
            replications: 300,
            seed: 1,
            methods: Method::STANDARD.to_vec(),
            fit: FitConfig::default(),
            cap: DEFAULT_CAP,
            screen_alpha: crate::ipw::DEFAULT_SCREEN_ALPHA,
        }
    }
}

impl SimConfig {
    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or(self.error_model.default_tau())
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 8 {
            return Err(Error::Config("p must be at least 8".into()));
        }
        if self.n < 50 {
            return Err(Error::Config("n must be at least 50".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        FitConfig { tau: self.tau(), ..self.fit.clone() }.validate()
    }
}

/// Draws replication `rep` of the experiment.
pub fn generate_replication(cfg: &SimConfig, rep: u64) -> Result<Replication> {
    let mut rng = replication_rng(cfg.seed, rep);
    generate(cfg.n, cfg.p, cfg.tau(), cfg.error_model, cfg.missing_model, &mut rng)
}

/// Runs one method on one replication.
pub fn run_method(cfg: &SimConfig, rep: &Replication, method: Method) -> Result<RepMetrics> {
    let fit_cfg = FitConfig { tau: cfg.tau(), ..cfg.fit.clone() };
    let weight_cfg = |m| WeightConfig {
        cap: cfg.cap,
        screen_alpha: cfg.screen_alpha,
        ..WeightConfig::with_method(m)
    };
    let (frame, weights) = match method {
        Method::Full => (&rep.full, naive_weights(&rep.full)),
        Method::Naive => (&rep.frame, naive_weights(&rep.frame)),
        Method::Parametric => (&rep.frame, weight_cfg(WeightMethod::Parametric).estimate(&rep.frame, None)?),
        Method::Kernel => (&rep.frame, weight_cfg(WeightMethod::Kernel).estimate(&rep.frame, None)?),
        Method::True => (&rep.frame, true_weights(&rep.frame, &rep.truth.pi, cfg.cap)?),
    };
    let fit = select_fit(frame, &fit_cfg, &weights)?;
    Ok(score_replication(&rep.truth, frame, &fit, method, weights.capped_count))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub summaries: Vec<MethodSummary>,
    /// Every (replication, method) outcome in replication order.
    pub replications: Vec<RepMetrics>,
}

/// Runs every replication (in parallel) and aggregates per method. Results
/// do not depend on the thread count.
pub fn run_experiment(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let per_rep: Vec<Vec<RepMetrics>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let data = match generate_replication(cfg, rep) {
                Ok(d) => d,
                Err(e) => {
                    return cfg
                        .methods
                        .iter()
                        .map(|&m| RepMetrics::failed(rep, m, e.to_string()))
                        .collect()
                }
            };
            cfg.methods
                .iter()
                .map(|&m| match run_method(cfg, &data, m) {
                    Ok(mut r) => {
                        r.replication = rep;
                        r
                    }
                    Err(e) => {
                        log::warn!("replication {rep}, {}: {e}", m.label());
                        RepMetrics::failed(rep, m, e.to_string())
                    }
                })
                .collect()
        })
        .collect();
    let replications: Vec<RepMetrics> = per_rep.into_iter().flatten().collect();
    let summaries = cfg
        .methods
        .iter()
        .map(|&m| {
            let rows: Vec<&RepMetrics> = replications.iter().filter(|r| r.method == m).collect();
            summarize(m, &rows, &dgp_beta(cfg))
        })
        .collect();
    Ok(SimReport { config: cfg.clone(), summaries, replications })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn dgp_beta(cfg: &SimConfig) -> Vec<f64> {
    let mut beta = vec![0.0; cfg.p];
    beta[0] = 1.0;
    beta[2] = -1.0;
    beta[cfg.p - 1] = match cfg.error_model {
        ErrorModel::T3 => 1.0,
        ErrorModel::Hetero => 1.0 + cfg.error_model.quantile(cfg.tau()),
    };
    beta
}

impl SimReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// One row per method with the table metrics and their standard errors.
    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.summaries {
            w.serialize(s.flat(self.config.n))?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))
    }

    /// One row per (replication, method).
    pub fn write_replications<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.replications {
            w.serialize(r.flat())?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        self.write_summary(create(path)?)
    }

    pub fn write_replications_csv(&self, path: &Path) -> Result<()> {
        self.write_replications(create(path)?)
    }
}
