//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Deterministic criteria (solver, optimality conditions, penalty and spline
//! analytics, kernel values, LLA descent) fail the run. Monte-Carlo
//! targets are reported but do not change the exit status.
//!
//! `IPWQR_ACCEPTANCE_SCALE` (default 1) multiplies every replication count;
//! `IPWQR_ACCEPTANCE_HIGH_P` (default 300) sets the high-dimensional `p`;
//! `IPWQR_ACCEPTANCE_ONLY` (comma-separated: unit, designation, intervals,
//! simulation) restricts the run to some groups.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ipwqr::fit::{prediction_interval, wqbic_designate, FitConfig, IntervalConfig};
use ipwqr::frame::ModelFrame;
use ipwqr::ipw::{fit_kernel_weights, naive_weights, WeightConfig, WeightMethod};
use ipwqr::penalty::{PenaltyFamily, PenaltySpec};
use ipwqr::qr::{solve, verify_subgradient, QrProblem};
use ipwqr::simlab::{run_experiment, Method, MethodSummary, MissingModel, SimConfig, SimReport};
use ipwqr::splines::SplineBasis;

struct Outcome {
    name: &'static str,
    pass: bool,
    enforced: bool,
    detail: String,
}

struct Suite {
    scale: f64,
    outcomes: Vec<Outcome>,
}

impl Suite {
    fn reps(&self, base: usize) -> usize {
        ((base as f64 * self.scale).round() as usize).max(2)
    }

    fn record(&mut self, name: &'static str, pass: bool, enforced: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.outcomes.push(Outcome { name, pass, enforced, detail });
    }
}

fn env_or<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn solver_oracle(s: &mut Suite) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=8);
        let m = rng.gen_range(1..=2);
        let x = DMatrix::from_fn(n, m, |_, j| if j == 0 { 1.0 } else { rng.gen_range(-3.0..3.0) });
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
        let mut w: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.1..3.0) })
            .collect();
        if w.iter().all(|v| *v == 0.0) {
            w[0] = 1.0;
        }
        let l1: Vec<f64> = (0..m)
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.01..4.0) })
            .collect();
        let tau = rng.gen_range(0.05..0.95);
        let problem = QrProblem::new(&x, &y, tau, &w, &l1).unwrap();
        match solve(&problem) {
            Ok(sol) => {
                let oracle = common::brute_force(&x, &y, &w, &l1, tau);
                let got = problem.objective(&sol.coef);
                worst = worst.max((got - oracle).abs() / (1.0 + oracle.abs()));
            }
            Err(_) => errors += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-7 && errors == 0 && secs < 10.0;
    s.record(
        "solver-oracle",
        pass,
        true,
        format!("200 instances, max relative objective gap {worst:.2e} (tol 1e-7), {errors} errors, {secs:.2}s (limit 10s)"),
    );
}

fn kkt_suite(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_active: f64 = 0.0;
    let mut worst_excess: f64 = 0.0;
    let mut errors = 0;
    for _ in 0..100 {
        let n = rng.gen_range(20..=60);
        let m = rng.gen_range(2..=6);
        let x = DMatrix::from_fn(n, m, |_, j| if j == 0 { 1.0 } else { rng.sample::<f64, _>(StandardNormal) });
        let y = DVector::from_fn(n, |i, _| {
            x[(i, 1)] + if m > 2 { -0.5 * x[(i, 2)] } else { 0.0 } + rng.sample::<f64, _>(StandardNormal)
        });
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
        let lambda = rng.gen_range(0.01..0.5) * n as f64;
        let l1: Vec<f64> = (0..m).map(|j| if j == 0 { 0.0 } else { lambda * rng.gen_range(0.5..1.5) }).collect();
        let tau = rng.gen_range(0.1..0.9);
        let problem = QrProblem::new(&x, &y, tau, &w, &l1).unwrap();
        match solve(&problem) {
            Ok(sol) => {
                let rep = verify_subgradient(&problem, &sol.coef);
                worst_active = worst_active.max(rep.stationarity);
                worst_excess = worst_excess.max(rep.inactive_excess);
            }
            Err(_) => errors += 1,
        }
    }
    let pass = worst_active <= 1e-6 && worst_excess <= 1e-6 && errors == 0;
    s.record(
        "kkt-conditions",
        pass,
        true,
        format!(
            "100 penalized instances, max active/unpenalized violation {worst_active:.2e}, max inactive excess over lambda {worst_excess:.2e} (tol 1e-6), {errors} errors"
        ),
    );
}

fn penalty_analytics(s: &mut Suite) {
    let mut worst_fd: f64 = 0.0;
    let mut exact = true;
    for family in [PenaltyFamily::Scad, PenaltyFamily::Mcp] {
        for lambda in [0.1, 0.5, 1.0, 2.0] {
            let spec = PenaltySpec::with_default_a(family, lambda).unwrap();
            let a = spec.a();
            let h = 1e-6;
            for k in 1..400 {
                let b = k as f64 * (a + 1.0) * lambda / 400.0;
                if spec.breakpoints().iter().any(|bp| (b - bp).abs() < 1e-3) {
                    continue;
                }
                let fd = (spec.value(b + h) - spec.value(b - h)) / (2.0 * h);
                worst_fd = worst_fd.max((fd - spec.derivative(b)).abs());
            }
            if family == PenaltyFamily::Scad {
                for b in [a * lambda * 1.0001, a * lambda * 2.0, 1e3 * lambda] {
                    exact &= spec.value(b) == (a + 1.0) * lambda * lambda / 2.0;
                    exact &= spec.derivative(b) == 0.0;
                }
            }
        }
    }
    s.record(
        "penalty-analytics",
        worst_fd <= 1e-6 && exact,
        true,
        format!("max |finite difference - derivative| {worst_fd:.2e} (tol 1e-6); SCAD flat region exact: {exact}"),
    );
}

fn spline_partition(s: &mut Suite) {
    let mut worst: f64 = 0.0;
    for degree in 1..=3 {
        for k in 0..=4 {
            let knots: Vec<f64> = (1..=k).map(|i| i as f64 / (k + 1) as f64).collect();
            let basis = SplineBasis::new(degree, knots).unwrap();
            for g in 0..1000 {
                let z = g as f64 / 999.0;
                let total: f64 = basis.evaluate_full(z).unwrap().iter().sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
    }
    s.record(
        "spline-partition-of-unity",
        worst <= 1e-12,
        true,
        format!("max |sum - 1| {worst:.2e} over 1000 points, degrees 1-3, 0-4 knots (tol 1e-12)"),
    );
}

fn two_point_frame(r: [bool; 2]) -> ModelFrame {
    let x = DMatrix::from_fn(2, 1, |i, _| if r[i] { 1.0 } else { f64::NAN });
    ModelFrame::new(
        DVector::from_vec(vec![0.0, 1.0]),
        x,
        DMatrix::zeros(2, 0),
        "y",
        vec!["x".into()],
        vec![],
        vec![0],
        None,
    )
    .unwrap()
}

fn kernel_values(s: &mut Suite) {
    let w = fit_kernel_weights(&two_point_frame([true, false]), &[0], Some(1.0), 25.0).unwrap();
    let expected = 1.0 / (1.0 + (-0.5f64).exp());
    let err = (w.pi[0] - expected).abs();
    let all = fit_kernel_weights(&two_point_frame([true, true]), &[0], Some(1.0), 25.0).unwrap();
    let ones = all.pi.iter().all(|&p| p == 1.0);
    s.record(
        "kernel-unit-values",
        err <= 1e-9 && (w.pi[0] - 0.62246).abs() < 5e-6 && ones,
        true,
        format!("two-point estimate {:.9} (expected {expected:.9}, |diff| {err:.1e}); all-observed exactly 1: {ones}", w.pi[0]),
    );
}

fn summary(report: &SimReport, m: Method) -> &MethodSummary {
    report.summary(m).expect("method was run")
}

fn describe(s: &MethodSummary) -> String {
    format!(
        "{} Bias {:.3}±{:.3} True {:.2} TV {:.2} FV {:.2} ({} ok, {} failed)",
        s.method.label(),
        s.bias,
        s.se_bias,
        s.true_rate,
        s.tv,
        s.fv,
        s.replications,
        s.failures
    )
}

fn experiment(n: usize, p: usize, missing: MissingModel, reps: usize, methods: Vec<Method>, seed: u64) -> SimReport {
    let mut cfg = SimConfig {
        n,
        p,
        missing_model: missing,
        replications: reps,
        seed,
        methods,
        ..SimConfig::default()
    };
    if p > 50 {
        cfg.fit.max_active = Some(40);
    }
    let start = Instant::now();
    let report = run_experiment(&cfg).unwrap();
    println!(
        "  (n = {n}, p = {p}, missing model {missing:?}, {reps} replications: {:.0}s)",
        start.elapsed().as_secs_f64()
    );
    report
}

struct LlaTally {
    fits: usize,
    nonconverged: usize,
    descent: usize,
}

impl LlaTally {
    fn add(&mut self, r: &SimReport) {
        for s in &r.summaries {
            self.fits += s.fits;
            self.nonconverged += s.nonconverged;
            self.descent += s.descent_violations;
        }
    }
}

fn model_one(s: &mut Suite, tally: &mut LlaTally) -> SimReport {
    let reps = s.reps(100);
    let r = experiment(400, 8, MissingModel::Model1, reps, vec![Method::Naive, Method::Parametric, Method::Kernel], 4101);
    tally.add(&r);
    let (nv, pw, kw) = (summary(&r, Method::Naive), summary(&r, Method::Parametric), summary(&r, Method::Kernel));
    let near = |v: f64, t: f64, tol: f64| (v - t).abs() <= tol;
    let bias_ok = near(nv.bias, 0.44, 0.15) && near(pw.bias, 0.22, 0.15) && near(kw.bias, 0.27, 0.15);
    let true_ok = near(nv.true_rate, 0.83, 0.12) && near(pw.true_rate, 0.87, 0.12) && near(kw.true_rate, 0.88, 0.12);
    let order_ok = pw.bias < nv.bias && kw.bias < nv.bias;
    s.record(
        "mc-model1-bias-targets",
        bias_ok,
        false,
        format!("targets 0.44/0.22/0.27 ±0.15; {} | {} | {}", describe(nv), describe(pw), describe(kw)),
    );
    s.record(
        "mc-model1-true-rates",
        true_ok,
        false,
        format!(
            "targets 0.83/0.87/0.88 ±0.12; got {:.2}/{:.2}/{:.2}",
            nv.true_rate, pw.true_rate, kw.true_rate
        ),
    );
    s.record(
        "mc-model1-weighted-beats-naive",
        order_ok,
        false,
        format!("Bias P Wt {:.3}, K Wt {:.3} vs Naive {:.3}", pw.bias, kw.bias, nv.bias),
    );
    r
}

fn model_two(s: &mut Suite, tally: &mut LlaTally) {
    let reps = s.reps(100);
    let r = experiment(400, 8, MissingModel::Model2, reps, vec![Method::Naive, Method::Kernel], 4202);
    tally.add(&r);
    let (nv, kw) = (summary(&r, Method::Naive), summary(&r, Method::Kernel));
    let pass = (kw.bias - 0.09).abs() <= 0.1 && kw.bias < nv.bias;
    s.record(
        "mc-model2-kernel-advantage",
        pass,
        false,
        format!("K Wt Bias target 0.09 ±0.1 and below Naive (reference 0.27); {} | {}", describe(kw), describe(nv)),
    );
}

fn high_dimensional(s: &mut Suite, tally: &mut LlaTally) {
    let p: usize = env_or("IPWQR_ACCEPTANCE_HIGH_P", 300);
    let reps = s.reps(50);
    let r = experiment(1000, p, MissingModel::Model1, reps, vec![Method::Kernel], 4303);
    tally.add(&r);
    let kw = summary(&r, Method::Kernel);
    s.record(
        "mc-high-dimensional",
        kw.true_rate >= 0.85 && kw.fv <= 0.3,
        false,
        format!("p = {p}: need True >= 0.85 and FV <= 0.3; {}", describe(kw)),
    );
}

fn bias_shrink(s: &mut Suite, at_400: &SimReport, tally: &mut LlaTally) {
    let reps = s.reps(100);
    let methods = vec![Method::Parametric, Method::Kernel];
    let small = experiment(200, 8, MissingModel::Model1, reps, methods.clone(), 4404);
    let large = experiment(1000, 8, MissingModel::Model1, reps, methods, 4405);
    tally.add(&small);
    tally.add(&large);
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [Method::Parametric, Method::Kernel] {
        let (b200, b400, b1000) = (summary(&small, m).bias, summary(at_400, m).bias, summary(&large, m).bias);
        let shrink = 1.0 - b1000 / b200;
        pass &= shrink >= 0.4;
        parts.push(format!("{} {b200:.3} -> {b400:.3} -> {b1000:.3} (shrink {:.0}%)", m.label(), 100.0 * shrink));
    }
    s.record("mc-weighted-bias-shrinks", pass, false, format!("need >= 40% from n = 200 to 1000; {}", parts.join(" | ")));
}

fn lla_invariants(s: &mut Suite, tally: &LlaTally) {
    let converged = 1.0 - tally.nonconverged as f64 / tally.fits.max(1) as f64;
    s.record(
        "lla-descent-and-convergence",
        tally.descent == 0 && converged >= 0.99 && tally.fits > 0,
        true,
        format!(
            "{} fits: {} descent violations (slack 1e-9), {:.2}% converged within 50 iterations (need 99%)",
            tally.fits,
            tally.descent,
            100.0 * converged
        ),
    );
}

fn univariate_frame(v: &[f64], y: &[f64]) -> ModelFrame {
    ModelFrame::new(
        DVector::from_column_slice(y),
        DMatrix::from_column_slice(v.len(), 1, v),
        DMatrix::zeros(v.len(), 0),
        "y",
        vec!["v".into()],
        vec![],
        vec![],
        None,
    )
    .unwrap()
}

fn designation(s: &mut Suite) {
    let trials = 200;
    let n = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut nonlinear_hits, mut linear_hits) = (0, 0);
    for _ in 0..trials {
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y_sin: Vec<f64> = z.iter().zip(&e).map(|(z, e)| (2.0 * PI * z).sin() + e).collect();
        let y_lin: Vec<f64> = z.iter().zip(&e).map(|(z, e)| 2.0 * z + e).collect();
        let f = univariate_frame(&z, &y_sin);
        if wqbic_designate(&f, 0, 0.5, &naive_weights(&f)).unwrap().is_nonlinear() {
            nonlinear_hits += 1;
        }
        let f = univariate_frame(&z, &y_lin);
        if !wqbic_designate(&f, 0, 0.5, &naive_weights(&f)).unwrap().is_nonlinear() {
            linear_hits += 1;
        }
    }
    let (nl, li) = (nonlinear_hits as f64 / trials as f64, linear_hits as f64 / trials as f64);
    s.record(
        "designation-rates",
        nl >= 0.8 && li >= 0.9,
        false,
        format!("sin(2 pi z) designated nonlinear {nl:.3} (need 0.80); linear signal kept linear {li:.3} (need 0.90); n = {n}, {trials} trials"),
    );
}

/// Homoskedastic data with one covariate missing at random:
/// `y = 1 + x1 - x2 + sin(2π z) + ε`, `ε ~ N(0, 1)`, and `x2` observed with
/// probability `logistic(1.5 - x1 + z)`. Missingness does not involve `y`,
/// so complete test rows share the population conditional law.
fn interval_data(n: usize, rng: &mut ChaCha8Rng) -> ModelFrame {
    let mut x = DMatrix::zeros(n, 3);
    let mut z = DMatrix::zeros(n, 1);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        for j in 0..3 {
            x[(i, j)] = rng.sample(StandardNormal);
        }
        z[(i, 0)] = rng.gen_range(0.0..1.0);
        let e: f64 = rng.sample(StandardNormal);
        y[i] = 1.0 + x[(i, 0)] - x[(i, 1)] + (2.0 * PI * z[(i, 0)]).sin() + e;
        let eta: f64 = 1.5 - x[(i, 0)] + z[(i, 0)];
        if rng.gen::<f64>() >= 1.0 / (1.0 + (-eta).exp()) {
            x[(i, 1)] = f64::NAN;
        }
    }
    ModelFrame::new(
        y,
        x,
        z,
        "y",
        vec!["x1".into(), "x2".into(), "x3".into()],
        vec!["z".into()],
        vec![1],
        None,
    )
    .unwrap()
}

fn intervals(s: &mut Suite) {
    let partitions = s.reps(100);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let data = interval_data(628, &mut rng);
    let cfg = IntervalConfig {
        lo: 0.05,
        hi: 0.95,
        fit: FitConfig::default(),
        weights: WeightConfig::with_method(WeightMethod::Kernel),
        designate: true,
    };
    let start = Instant::now();
    let mut rates = Vec::new();
    let mut errors = 0;
    for _ in 0..partitions {
        let mut idx: Vec<usize> = (0..data.n()).collect();
        idx.shuffle(&mut rng);
        let (test, train) = idx.split_at(100);
        let result = data
            .select_rows(train)
            .and_then(|tr| data.select_rows(test).map(|te| (tr, te)))
            .and_then(|(tr, te)| prediction_interval(&tr, &te, &cfg));
        match result {
            Ok(r) => rates.push(r.capture_rate),
            Err(_) => errors += 1,
        }
    }
    let mean = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
    println!("  ({partitions} partitions: {:.0}s)", start.elapsed().as_secs_f64());
    s.record(
        "prediction-interval-capture",
        (mean - 0.90).abs() <= 0.03 && errors == 0,
        false,
        format!("mean capture {mean:.3} over {} partitions (target 0.90 ±0.03), {errors} errors", rates.len()),
    );
}

fn main() -> ExitCode {
    let mut suite = Suite { scale: env_or("IPWQR_ACCEPTANCE_SCALE", 1.0), outcomes: Vec::new() };
    if !(suite.scale > 0.0) {
        eprintln!("IPWQR_ACCEPTANCE_SCALE must be positive");
        return ExitCode::FAILURE;
    }
    let only: Option<Vec<String>> = std::env::var("IPWQR_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').map(|g| g.trim().to_string()).collect());
    let wants = |group: &str| only.as_ref().map_or(true, |o| o.iter().any(|g| g == group));
    let start = Instant::now();
    if wants("unit") {
        solver_oracle(&mut suite);
        kkt_suite(&mut suite);
        penalty_analytics(&mut suite);
        spline_partition(&mut suite);
        kernel_values(&mut suite);
    }
    if wants("designation") {
        designation(&mut suite);
    }
    if wants("intervals") {
        intervals(&mut suite);
    }
    if wants("simulation") {
        let mut tally = LlaTally { fits: 0, nonconverged: 0, descent: 0 };
        let at_400 = model_one(&mut suite, &mut tally);
        model_two(&mut suite, &mut tally);
        bias_shrink(&mut suite, &at_400, &mut tally);
        high_dimensional(&mut suite, &mut tally);
        lla_invariants(&mut suite, &tally);
    }
    let passed = suite.outcomes.iter().filter(|o| o.pass).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.0}s",
        suite.outcomes.len(),
        start.elapsed().as_secs_f64()
    );
    let hard: Vec<&Outcome> = suite.outcomes.iter().filter(|o| o.enforced && !o.pass).collect();
    for o in &hard {
        eprintln!("enforced criterion failed: {} ({})", o.name, o.detail);
    }
    if hard.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
