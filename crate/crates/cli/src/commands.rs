use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use ipwqr::fit::{
    prediction_interval, select_fit, wqbic_designate, DesignationClass, FitConfig, FitResult,
    IntervalConfig, PenaltyChoice,
};
use ipwqr::frame::{ingest_csv, ModelFrame, RoleMap};
use ipwqr::ipw::{screen_missing_model, WeightConfig, WeightMethod};
use ipwqr::penalty::{PenaltyFamily, PenaltySpec};
use ipwqr::simlab::{run_experiment, Method, SimConfig};

use crate::overlay::ConfigFile;
use crate::{
    Cli, Command, DesignateArgs, FitArgs, PenaltyCurveArgs, PredictArgs, RoleArgs, ScreenArgs,
    SimulateArgs, TuningArgs, UsageError, WeightArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p).map_err(|e| UsageError(format!("{e:#}")))?,
        None => ConfigFile::default(),
    };
    match &cli.command {
        Command::Fit(a) => fit(a, &file),
        Command::Simulate(a) => simulate(a, &file),
        Command::Screen(a) => screen(a, &file),
        Command::Predict(a) => predict(a, &file),
        Command::Designate(a) => designate(a, &file),
        Command::PenaltyCurve(a) => penalty_curve(a),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_rows<T: Serialize>(out: &Option<PathBuf>, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn roles(args: &RoleArgs, file: &ConfigFile) -> Result<RoleMap> {
    let base = RoleMap {
        response: args.response.clone().unwrap_or_default(),
        linear: args.linear.clone(),
        nonlinear: args.nonlinear.clone(),
        missing_capable: args.missing_capable.clone(),
    };
    let roles = file.apply("roles", base)?;
    if roles.response.is_empty() {
        return Err(usage("a response column is required (--response or [roles] in the config)"));
    }
    Ok(roles)
}

fn penalty_choice(name: &str, a: Option<f64>) -> Result<Option<PenaltyChoice>> {
    if name.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let family: PenaltyFamily = name.parse().map_err(|e| usage(format!("{e}")))?;
    let mut choice = PenaltyChoice::new(family);
    if let Some(a) = a {
        choice.a = a;
    }
    Ok(Some(choice))
}

fn fit_config(tau: f64, t: &TuningArgs, file: &ConfigFile) -> Result<FitConfig> {
    let base = FitConfig {
        tau,
        penalty: penalty_choice(&t.penalty, t.a)?,
        lambda_grid: t.lambda.clone(),
        grid_size: t.grid_size,
        grid_ratio: t.grid_ratio,
        knot_grid: vec![t.knots.clone()],
        degree: t.degree,
        lla_tol: t.lla_tol,
        lla_max_iter: t.lla_max_iter,
        max_active: t.max_active,
    };
    let cfg = file.apply("fit", base)?;
    cfg.validate().map_err(|e| usage(format!("{e}")))?;
    Ok(cfg)
}

fn weight_config(w: &WeightArgs, file: &ConfigFile) -> Result<WeightConfig> {
    let method: WeightMethod = w.weights.parse().map_err(|e| usage(format!("{e}")))?;
    let base = WeightConfig {
        method,
        nonparametric_screen: w.nonparametric_screen,
        screen_alpha: w.screen_alpha,
        bandwidth: w.bandwidth,
        cap: w.cap,
        columns: None,
    };
    file.apply("weights", base)
}

/// Reads one numeric column by name, for known probabilities.
fn read_column(path: &Path, name: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let idx = r
        .headers()?
        .iter()
        .position(|h| h.trim() == name)
        .with_context(|| format!("column `{name}` not found"))?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let cell = rec.get(idx).unwrap_or("").trim();
            cell.parse::<f64>()
                .with_context(|| format!("row {i}, column `{name}`: `{cell}` is not a number"))
        })
        .collect()
}

fn estimate(
    frame: &ModelFrame,
    cfg: &WeightConfig,
    args: &WeightArgs,
    data: &Path,
) -> Result<ipwqr::ipw::WeightEstimate> {
    let pi0 = match (&cfg.method, &args.pi_column) {
        (WeightMethod::True, Some(col)) => Some(read_column(data, col)?),
        (WeightMethod::True, None) => return Err(usage("true weights need --pi-column")),
        _ => None,
    };
    Ok(cfg.estimate(frame, pi0.as_deref())?)
}

#[derive(Serialize)]
struct Term {
    term: String,
    value: f64,
}

fn fit_terms(frame: &ModelFrame, fit: &FitResult) -> Vec<Term> {
    let mut rows = vec![
        Term { term: "tau".into(), value: fit.tau },
        Term { term: "lambda".into(), value: fit.lambda.unwrap_or(f64::NAN) },
        Term { term: "qbic".into(), value: fit.qbic },
        Term { term: "nu".into(), value: fit.nu as f64 },
        Term { term: "objective".into(), value: fit.objective },
        Term { term: "loss".into(), value: fit.loss },
    ];
    for (name, k) in frame.nonlinear_names().iter().zip(&fit.knots) {
        rows.push(Term { term: format!("knots:{name}"), value: *k as f64 });
    }
    for (name, b) in frame.linear_names().iter().zip(fit.beta.iter()) {
        rows.push(Term { term: name.clone(), value: *b });
    }
    rows.push(Term { term: "spline:constant".into(), value: fit.xi[0] });
    for (j, name) in frame.nonlinear_names().iter().enumerate() {
        for (k, c) in fit.basis.block_range(j).enumerate() {
            rows.push(Term { term: format!("spline:{name}:{}", k + 1), value: fit.xi[c] });
        }
    }
    rows
}

#[derive(Serialize)]
struct GhatRow<'a> {
    variable: &'a str,
    z: f64,
    u: f64,
    component: f64,
}

fn fit(a: &FitArgs, file: &ConfigFile) -> Result<()> {
    let roles = roles(&a.roles, file)?;
    let frame = ingest_csv(&a.data, &roles)?;
    let cfg = fit_config(a.tau, &a.tuning, file)?;
    let wcfg = weight_config(&a.weights, file)?;
    let weights = estimate(&frame, &wcfg, &a.weights, &a.data)?;
    log::info!(
        "{} weights: screened {:?}, {} capped",
        weights.method,
        weights.screen_set.iter().map(|&c| frame.t_name(c)).collect::<Vec<_>>(),
        weights.capped_count
    );
    let fit = select_fit(&frame, &cfg, &weights)?;
    write_rows(&a.out, fit_terms(&frame, &fit))?;
    if a.scores.is_some() {
        write_rows(&a.scores, fit.score_table.iter().map(|r| ScoreOut::from(r)))?;
    }
    if a.ghat_grid.is_some() {
        if a.grid_points < 2 {
            return Err(usage("--grid-points must be at least 2"));
        }
        let mut rows = Vec::new();
        for (j, name) in frame.nonlinear_names().iter().enumerate() {
            for g in 0..a.grid_points {
                let u = g as f64 / (a.grid_points - 1) as f64;
                rows.push(GhatRow {
                    variable: name,
                    z: fit.z_scales[j].invert(u),
                    u,
                    component: fit.component(j, u)?,
                });
            }
        }
        write_rows(&a.ghat_grid, rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScoreOut {
    lambda: Option<f64>,
    knots: String,
    nu: usize,
    qbic: f64,
    active: usize,
    lla_iterations: usize,
    lla_converged: bool,
}

impl From<&ipwqr::fit::ScoreRow> for ScoreOut {
    fn from(r: &ipwqr::fit::ScoreRow) -> Self {
        ScoreOut {
            lambda: r.lambda,
            knots: r.knots.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";"),
            nu: r.nu,
            qbic: r.qbic,
            active: r.active,
            lla_iterations: r.lla_iterations,
            lla_converged: r.lla_converged,
        }
    }
}

fn simulate(a: &SimulateArgs, file: &ConfigFile) -> Result<()> {
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<Method>().map_err(|e| usage(format!("{e}"))))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_config(a.tau.unwrap_or(0.5), &a.tuning, file)?;
    let base = SimConfig {
        n: a.n,
        p: a.p,
        tau: a.tau,
        error_model: a.error_model.parse().map_err(|e| usage(format!("{e}")))?,
        missing_model: a.missing_model.parse().map_err(|e| usage(format!("{e}")))?,
        replications: a.reps,
        seed: a.seed,
        methods,
        fit,
        cap: a.cap,
        screen_alpha: a.screen_alpha,
    };
    let cfg = file.apply("simulate", base)?;
    cfg.validate().map_err(|e| usage(format!("{e}")))?;
    let report = run_experiment(&cfg)?;
    report.write_summary(sink(&a.out)?)?;
    if let Some(p) = &a.replications {
        report.write_replications_csv(p)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScreenRow<'a> {
    column: &'a str,
    selected: bool,
}

fn screen(a: &ScreenArgs, file: &ConfigFile) -> Result<()> {
    let roles = roles(&a.roles, file)?;
    let frame = ingest_csv(&a.data, &roles)?;
    let picked = screen_missing_model(&frame, a.nonparametric, a.screen_alpha)?;
    write_rows(
        &a.out,
        (0..frame.t().ncols()).map(|c| ScreenRow { column: frame.t_name(c), selected: picked.contains(&c) }),
    )
}

#[derive(Serialize)]
struct IntervalOut {
    lo: f64,
    hi: f64,
    capture_rate: f64,
    mean_length: f64,
    sd_length: f64,
    crossings: usize,
    scored: usize,
}

fn predict(a: &PredictArgs, file: &ConfigFile) -> Result<()> {
    let roles = roles(&a.roles, file)?;
    let train = ingest_csv(&a.train, &roles)?;
    let test = ingest_csv(&a.test, &roles)?;
    let wcfg = weight_config(&a.weights, file)?;
    if wcfg.method == WeightMethod::True {
        return Err(usage("true weights are not available for prediction intervals"));
    }
    let base = IntervalConfig {
        lo: a.lo,
        hi: a.hi,
        fit: fit_config(a.lo, &a.tuning, file)?,
        weights: wcfg,
        designate: !a.no_designate,
    };
    let cfg = file.apply("interval", base)?;
    let report = prediction_interval(&train, &test, &cfg)?;
    for d in report.designations_lo.iter().chain(&report.designations_hi) {
        log::info!("{}: {:?}", d.name, d.class);
    }
    write_rows(
        &a.out,
        [IntervalOut {
            lo: cfg.lo,
            hi: cfg.hi,
            capture_rate: report.capture_rate,
            mean_length: report.mean_length,
            sd_length: report.sd_length,
            crossings: report.crossings,
            scored: report.scored,
        }],
    )
}

#[derive(Serialize)]
struct DesignationOut {
    variable: String,
    class: &'static str,
    knots: Option<usize>,
    weak_signal: bool,
    model: String,
    coefficients: usize,
    wqbic: f64,
}

fn designate(a: &DesignateArgs, file: &ConfigFile) -> Result<()> {
    let roles = roles(&a.roles, file)?;
    let frame = ingest_csv(&a.data, &roles)?;
    let wcfg = weight_config(&a.weights, file)?;
    let weights = estimate(&frame, &wcfg, &a.weights, &a.data)?;
    let mut rows = Vec::new();
    for c in 0..frame.p() + frame.d() {
        let d = match wqbic_designate(&frame, c, a.tau, &weights) {
            Ok(d) => d,
            Err(ipwqr::Error::Config(msg)) => {
                log::warn!("{msg}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let (class, knots) = match d.class {
            DesignationClass::InterceptOnly => ("intercept_only", None),
            DesignationClass::Linear => ("linear", None),
            DesignationClass::Nonlinear { knots } => ("nonlinear", Some(knots)),
        };
        for (model, coefficients, wqbic) in &d.scores {
            rows.push(DesignationOut {
                variable: d.name.clone(),
                class,
                knots,
                weak_signal: d.weak_signal(),
                model: model.clone(),
                coefficients: *coefficients,
                wqbic: *wqbic,
            });
        }
    }
    write_rows(&a.out, rows)
}

#[derive(Serialize)]
struct CurveRow {
    beta: f64,
    value: f64,
    derivative: f64,
}

fn penalty_curve(a: &PenaltyCurveArgs) -> Result<()> {
    let family: PenaltyFamily = a.penalty.parse().map_err(|e| usage(format!("{e}")))?;
    let shape = a.a.unwrap_or(family.default_a());
    let spec = PenaltySpec::new(family, a.lambda, shape).map_err(|e| usage(format!("{e}")))?;
    if a.points < 2 {
        bail!(UsageError("--points must be at least 2".into()));
    }
    let max = a.max.unwrap_or((shape.max(1.0) + 1.0) * a.lambda);
    if !(max > 0.0 && max.is_finite()) {
        return Err(usage("--max must be positive"));
    }
    write_rows(
        &a.out,
        (0..a.points).map(|i| {
            let beta = max * i as f64 / (a.points - 1) as f64;
            CurveRow { beta, value: spec.value(beta), derivative: spec.derivative(beta) }
        }),
    )
}
