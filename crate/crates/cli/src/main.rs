//! Command-line front end: fitting, weight screening, designation,
//! prediction intervals, Monte-Carlo experiments and penalty curves.

mod commands;
mod overlay;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Reported with exit code 2, like a flag parsing error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "ipwqr", version, about = "Penalized partially linear quantile regression with covariates missing at random")]
#[command(arg_required_else_help = true, propagate_version = true)]
pub struct Cli {
    /// TOML file whose [fit], [weights], [roles], [simulate] and [interval]
    /// sections override the corresponding flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true, env = "IPWQR_THREADS")]
    pub threads: Option<usize>,
    /// More log output; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a penalized model with tuning by the weighted information criterion.
    Fit(FitArgs),
    /// Run a Monte-Carlo experiment on synthetic data.
    Simulate(SimulateArgs),
    /// Screen always-observed columns for the missingness model.
    Screen(ScreenArgs),
    /// Score quantile prediction intervals on a held-out file.
    Predict(PredictArgs),
    /// Decide linear versus nonlinear roles for each covariate.
    Designate(DesignateArgs),
    /// Tabulate a penalty and its derivative.
    PenaltyCurve(PenaltyCurveArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RoleArgs {
    /// Response column.
    #[arg(long)]
    pub response: Option<String>,
    /// Comma-separated linear covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub linear: Vec<String>,
    /// Comma-separated nonlinear covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub nonlinear: Vec<String>,
    /// Columns that may be missing (default: any covariate with a missing cell).
    #[arg(long, value_delimiter = ',')]
    pub missing_capable: Option<Vec<String>>,
}

#[derive(Args, Debug, Clone)]
pub struct WeightArgs {
    /// naive, parametric, kernel or true.
    #[arg(long, default_value = "kernel")]
    pub weights: String,
    /// Largest allowed inverse-probability weight.
    #[arg(long, default_value_t = ipwqr::ipw::DEFAULT_CAP)]
    pub cap: f64,
    /// Kernel bandwidth shared by every dimension (default: per-column rule).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Family-wise level of the screening tests.
    #[arg(long, default_value_t = ipwqr::ipw::DEFAULT_SCREEN_ALPHA)]
    pub screen_alpha: f64,
    /// Spline-expand screening candidates (default: only for kernel weights).
    #[arg(long)]
    pub nonparametric_screen: Option<bool>,
    /// Column holding known complete-case probabilities, for true weights.
    #[arg(long)]
    pub pi_column: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct TuningArgs {
    /// lasso, scad, mcp or none.
    #[arg(long, default_value = "scad")]
    pub penalty: String,
    /// Penalty shape (default: 3.7 for SCAD, 3 for MCP).
    #[arg(long)]
    pub a: Option<f64>,
    /// Explicit comma-separated lambda grid.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// Points on the automatic lambda grid.
    #[arg(long, default_value_t = ipwqr::fit::DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    /// Smallest automatic lambda as a fraction of the largest.
    #[arg(long, default_value_t = ipwqr::fit::DEFAULT_GRID_RATIO)]
    pub grid_ratio: f64,
    /// Candidate internal-knot counts, shared by every nonlinear column.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub knots: Vec<usize>,
    /// Spline degree.
    #[arg(long, default_value_t = ipwqr::splines::DEFAULT_DEGREE)]
    pub degree: usize,
    #[arg(long, default_value_t = ipwqr::fit::DEFAULT_LLA_TOL)]
    pub lla_tol: f64,
    #[arg(long, default_value_t = ipwqr::fit::DEFAULT_LLA_MAX_ITER)]
    pub lla_max_iter: usize,
    /// Stop each lambda path once more coefficients than this are nonzero.
    #[arg(long)]
    pub max_active: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Input CSV with a header row; NA or empty cells are missing.
    pub data: PathBuf,
    #[command(flatten)]
    pub roles: RoleArgs,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Coefficient CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Criterion value of every fit on the tuning grid.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Fitted nonlinear components on an even grid, for plotting.
    #[arg(long)]
    pub ghat_grid: Option<PathBuf>,
    #[arg(long, default_value_t = 101)]
    pub grid_points: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub p: usize,
    /// Quantile level (default: 0.5 for t3 errors, 0.7 for hetero).
    #[arg(long)]
    pub tau: Option<f64>,
    /// t3 or hetero.
    #[arg(long, default_value = "t3")]
    pub error_model: String,
    /// 1 or 2.
    #[arg(long, default_value = "1")]
    pub missing_model: String,
    #[arg(long, default_value_t = 300)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated subset of full, naive, parametric, kernel, true.
    #[arg(long, value_delimiter = ',', default_value = "full,naive,parametric,kernel")]
    pub methods: Vec<String>,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, default_value_t = ipwqr::ipw::DEFAULT_CAP)]
    pub cap: f64,
    #[arg(long, default_value_t = ipwqr::ipw::DEFAULT_SCREEN_ALPHA)]
    pub screen_alpha: f64,
    /// Summary CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-replication CSV.
    #[arg(long)]
    pub replications: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScreenArgs {
    pub data: PathBuf,
    #[command(flatten)]
    pub roles: RoleArgs,
    /// Spline-expand each candidate before testing.
    #[arg(long)]
    pub nonparametric: bool,
    #[arg(long, default_value_t = ipwqr::ipw::DEFAULT_SCREEN_ALPHA)]
    pub screen_alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Training CSV.
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out CSV with the same columns.
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub roles: RoleArgs,
    #[arg(long, default_value_t = 0.05)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.95)]
    pub hi: f64,
    /// Keep the given roles instead of re-deciding them at each quantile.
    #[arg(long)]
    pub no_designate: bool,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DesignateArgs {
    pub data: PathBuf,
    #[command(flatten)]
    pub roles: RoleArgs,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PenaltyCurveArgs {
    /// lasso, scad or mcp.
    #[arg(long, default_value = "scad")]
    pub penalty: String,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long)]
    pub a: Option<f64>,
    /// Right end of the |β| grid (default: (a + 1) λ).
    #[arg(long)]
    pub max: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            2 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("IPWQR_LOG")
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli);
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
