//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use sfde::Parallel;
use sfde_core::diagnostics::{
    convergence_study, make_holder_path, martingale_check, moment_bound_check, normalization_check,
};
use sfde_core::engine::simulate_gap_path;
use sfde_core::pricing::{
    black_scholes, closed_form_last_delay, hedge_replication_backtest, integrated_variance,
    price_full_memory_mc, price_gap_mc, price_nested, OptionKind,
};
use sfde_core::stats::combined_se;
use sfde_core::{
    FunctionalSpec, InitialPath, MarketConfig, Measure, Model, PathRecord, Serial,
    SimulationConfig,
};

const DT: f64 = 1.0 / 64.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn constants() -> (FunctionalSpec, FunctionalSpec) {
    (
        FunctionalSpec::constant(0.1).unwrap(),
        FunctionalSpec::constant(0.2).unwrap(),
    )
}

/// Moving-average drift and clamped realized volatility over the window.
fn path_dependent(window: f64) -> (FunctionalSpec, FunctionalSpec) {
    let f = FunctionalSpec::affine(FunctionalSpec::moving_average(window).unwrap(), 0.001, 0.0)
        .unwrap()
        .with_bounds(0.0, 0.5)
        .unwrap();
    let g = FunctionalSpec::affine(
        FunctionalSpec::realized_vol(window, 0.5, 50.0).unwrap(),
        0.02,
        0.1,
    )
    .unwrap();
    (f, g)
}

fn density(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Discounted lognormal call payoff integrated over the standard normal.
fn call_by_quadrature(s: f64, k: f64, r: f64, sigma: f64, tau: f64) -> f64 {
    let vol = sigma * tau.sqrt();
    let drift = (r - 0.5 * sigma * sigma) * tau;
    let z_star = ((k / s).ln() - drift) / vol;
    let payoff = |z: f64| (s * (drift + vol * z).exp() - k) * density(z);
    (-r * tau).exp() * simpson(&payoff, z_star, z_star.max(0.0) + 14.0, 200_000)
}

fn bs_recovery_closed_form() -> Outcome {
    // gap equal to the maturity: t = 0 already lies in the last delay period
    let theta = InitialPath::constant(100.0, 0.5, DT).unwrap();
    let path = PathRecord::from_parts(
        DT,
        96,
        1.0,
        0.5,
        vec![100.0; 97],
        None,
        Measure::Physical,
    );
    let path = match path {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("path: {e}")),
    };
    let (_, g) = constants();
    let mkt = MarketConfig::call(0.05, 100.0, 1.0).unwrap();
    let sigma2 = integrated_variance(&path, 0.0, 1.0, &g).unwrap();
    let closed = closed_form_last_delay(theta.current(), sigma2, 1.0, &mkt)
        .unwrap()
        .result
        .price;
    let oracle = call_by_quadrature(100.0, 100.0, 0.05, 0.2, 1.0);
    let bs = black_scholes(100.0, 100.0, 0.05, 0.2, 1.0).unwrap();
    let rel = (closed - oracle).abs() / oracle;
    let oracle_rel = (bs - oracle).abs() / oracle;
    outcome(
        rel <= 1e-8 && oracle_rel <= 1e-8,
        format!("closed form {closed:.12}, quadrature {oracle:.12}, rel err {rel:.2e}"),
    )
}

fn bs_recovery_mc() -> Outcome {
    let theta = InitialPath::constant(100.0, 0.5, DT).unwrap();
    let (f, g) = constants();
    let model = Model::new(&theta, &f, &g);
    let mkt = MarketConfig::call(0.05, 100.0, 1.0).unwrap();
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, DT)
        .with_seed(2024)
        .with_replicates(100_000);
    let start = Instant::now();
    let price = price_full_memory_mc(&Serial, 4, &model, &cfg, &mkt).unwrap();
    let elapsed = start.elapsed();
    let bs = black_scholes(100.0, 100.0, 0.05, 0.2, 1.0).unwrap();
    let est = price.estimate();
    outcome(
        est.within(bs, 3.0) && est.std_error < 0.15 && elapsed < Duration::from_secs(60),
        format!(
            "mc {:.4} +- {:.4} vs bs {bs:.4}, {:.1} SE, {:.1?} single-threaded",
            est.mean,
            est.std_error,
            (est.mean - bs).abs() / est.std_error,
            elapsed
        ),
    )
}

fn girsanov_normalization() -> Outcome {
    let start = Instant::now();
    let theta = InitialPath::constant(100.0, 0.5, DT).unwrap();
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, DT)
        .with_seed(77)
        .with_replicates(100_000);
    let (fc, gc) = constants();
    let (fp, gp) = path_dependent(0.5);
    let a = normalization_check(&Parallel, &Model::new(&theta, &fc, &gc), 0.05, &cfg).unwrap();
    let b = normalization_check(&Parallel, &Model::new(&theta, &fp, &gp), 0.05, &cfg.with_seed(78))
        .unwrap();
    let elapsed = start.elapsed();
    outcome(
        a.pass && b.pass && elapsed < Duration::from_secs(120),
        format!(
            "constant {:.5} +- {:.5}, path-dependent {:.5} +- {:.5}, {:.1?}",
            a.estimate.mean, a.estimate.std_error, b.estimate.mean, b.estimate.std_error, elapsed
        ),
    )
}

fn martingale_property() -> Outcome {
    let theta = make_holder_path(0.4, 5, 0.5, 100.0, DT).unwrap();
    let (f, g) = path_dependent(0.5);
    let model = Model::new(&theta, &f, &g);
    let mkt = MarketConfig::call(0.05, 100.0, 1.0).unwrap();
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, DT)
        .with_seed(404)
        .with_replicates(100_000);
    let reports = martingale_check(&Parallel, &model, &cfg, &mkt).unwrap();
    let detail = reports
        .iter()
        .map(|r| {
            format!(
                "t={}: {:.3} +- {:.3}",
                r.time.unwrap_or(f64::NAN),
                r.estimate.mean,
                r.estimate.std_error
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    outcome(
        reports.iter().all(|r| r.pass),
        format!("S(0) = {:.3}; {detail}", theta.current()),
    )
}

fn convergence_rate() -> Outcome {
    let start = Instant::now();
    let dt = 1.0 / 128.0;
    let theta = make_holder_path(0.4, 11, 0.5, 100.0, dt).unwrap();
    let (f, g) = path_dependent(0.5);
    let model = Model::new(&theta, &f, &g);
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, dt)
        .with_seed(505)
        .with_replicates(2000);
    let report = convergence_study(&Parallel, &[2, 4, 8, 16], 0.4, &model, &cfg).unwrap();
    let elapsed = start.elapsed();
    let slope = report.fitted_slope.unwrap_or(f64::NAN);
    outcome(
        report.slope_ok() && !report.degenerate && elapsed < Duration::from_secs(300),
        format!(
            "fitted slope {slope:.3} (bound {:.1}), discrepancies {:?}, {:.1?}",
            report.theoretical_slope + 0.5,
            report
                .discrepancies
                .iter()
                .map(|e| (e.mean * 1e3).round() / 1e3)
                .collect::<Vec<_>>(),
            elapsed
        ),
    )
}

fn moment_uniformity() -> Outcome {
    let dt = 1.0 / 128.0;
    let theta = make_holder_path(0.4, 11, 0.5, 100.0, dt).unwrap();
    let (f, g) = path_dependent(0.5);
    let model = Model::new(&theta, &f, &g);
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, dt)
        .with_seed(606)
        .with_replicates(2000);
    let report = moment_bound_check(&Parallel, &[2, 4, 8, 16], 1, &model, &cfg).unwrap();
    outcome(report.pass, format!("max/min ratio {:.4}", report.ratio))
}

fn put_call_parity() -> Outcome {
    let theta = InitialPath::constant(100.0, 0.5, DT).unwrap();
    let (f, g) = path_dependent(0.5);
    let model = Model::new(&theta, &f, &g);
    let call = MarketConfig::call(0.05, 105.0, 1.0).unwrap();
    let put = call.with_kind(OptionKind::Put);
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, DT)
        .with_seed(707)
        .with_replicates(50_000);
    let c = price_full_memory_mc(&Parallel, 4, &model, &cfg, &call).unwrap().estimate();
    let p = price_full_memory_mc(&Parallel, 4, &model, &cfg, &put).unwrap().estimate();
    let parity = 100.0 - 105.0 * (-0.05f64).exp();
    let gap = (c.mean - p.mean) - parity;
    let se = combined_se(&c, &p);
    outcome(
        gap.abs() <= 3.0 * se,
        format!("C - P = {:.4}, S0 - K e^-rT = {parity:.4}, {:.2} combined SE", c.mean - p.mean, gap.abs() / se),
    )
}

fn positivity() -> Outcome {
    let theta = make_holder_path(0.4, 8, 0.5, 1.0, DT).unwrap();
    let f = FunctionalSpec::constant(-0.5).unwrap();
    let g = FunctionalSpec::affine(FunctionalSpec::realized_vol(0.5, 0.5, 5.0).unwrap(), 0.4, 0.3)
        .unwrap();
    let model = Model::new(&theta, &f, &g);
    let cfg = SimulationConfig::new(2.0, 0.25, 0.5, DT).with_seed(808);
    let bad: Vec<usize> = sfde_core::Runner::map(&Parallel, 10_000, |i| {
        match simulate_gap_path(&model, &cfg, i as u64) {
            Ok(p) => p.prices().iter().filter(|&&s| s.is_nan() || s <= 0.0).count(),
            Err(_) => 1,
        }
    });
    let total: usize = bad.iter().sum();
    let min = sfde_core::Runner::map(&Parallel, 10_000, |i| {
        simulate_gap_path(&model, &cfg, i as u64)
            .map(|p| p.prices().iter().copied().fold(f64::INFINITY, f64::min))
            .unwrap_or(f64::NAN)
    })
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    outcome(total == 0, format!("{total} non-positive samples, smallest price {min:.3e}"))
}

fn hedge_replication() -> Outcome {
    let dt = 1.0 / 1024.0;
    let theta = InitialPath::constant(100.0, 0.5, dt).unwrap();
    let (f, g) = constants();
    let model = Model::new(&theta, &f, &g);
    let mkt = MarketConfig::call(0.05, 100.0, 1.0).unwrap();
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, dt).with_seed(909);
    let rows = sfde_core::Runner::map(&Parallel, 2000, |i| {
        let path = simulate_gap_path(&model, &cfg, i as u64).unwrap();
        let a = hedge_replication_backtest(&path, 1.0 / 64.0, &mkt, &g).unwrap();
        let b = hedge_replication_backtest(&path, 1.0 / 128.0, &mkt, &g).unwrap();
        (a.terminal_error.powi(2), b.terminal_error.powi(2))
    });
    let coarse = (rows.iter().map(|r| r.0).sum::<f64>() / rows.len() as f64).sqrt();
    let fine = (rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64).sqrt();
    let ratio = fine / coarse;
    outcome(
        (0.6..=0.9).contains(&ratio),
        format!("rms error {coarse:.4} -> {fine:.4}, ratio {ratio:.3}"),
    )
}

fn tower_consistency() -> Outcome {
    let theta = make_holder_path(0.4, 3, 0.5, 100.0, DT).unwrap();
    let (f, g) = path_dependent(0.5);
    let model = Model::new(&theta, &f, &g);
    let mkt = MarketConfig::call(0.05, 100.0, 1.0).unwrap();
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, DT).with_replicates(100_000);
    let nested = price_nested(&Parallel, 0.0, None, &model, &cfg.with_seed(1010), &mkt)
        .unwrap()
        .estimate();
    let direct = price_gap_mc(&Parallel, &model, &cfg.with_seed(1011), &mkt)
        .unwrap()
        .estimate();
    let se = combined_se(&nested, &direct);
    let gap = (nested.mean - direct.mean).abs();
    outcome(
        gap <= 3.0 * se,
        format!(
            "nested {:.4} +- {:.4}, gap-dynamics mc {:.4} +- {:.4}, {:.2} combined SE",
            nested.mean,
            nested.std_error,
            direct.mean,
            direct.std_error,
            gap / se
        ),
    )
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_sfde");
    let config: PathBuf = [env!("CARGO_MANIFEST_DIR"), "configs", "path_dependent.toml"]
        .iter()
        .collect();
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("tempdir: {e}")),
    };
    let mut failures = Vec::new();
    for cmd in ["simulate", "price", "converge", "hedge", "check"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{cmd}-{run}.csv"));
            let status = Command::new(bin)
                .args([cmd, "--config"])
                .arg(&config)
                .args(["--seed", "31", "--replicates", "400", "--out"])
                .arg(&out)
                .status();
            match status {
                Ok(s) if s.success() => {}
                other => failures.push(format!("{cmd}: {other:?}")),
            }
            let csv = std::fs::read(&out).unwrap_or_default();
            let manifest = std::fs::read_to_string(format!("{}.manifest", out.display()))
                .unwrap_or_default();
            outputs.push((csv, manifest));
        }
        if outputs[0].0.is_empty() || outputs[0].0 != outputs[1].0 {
            failures.push(format!("{cmd}: csv bodies differ"));
        }
        let strip = |m: &str| -> Vec<String> {
            m.lines()
                .filter(|l| !l.starts_with("timestamp = "))
                .map(str::to_owned)
                .collect()
        };
        if strip(&outputs[0].1) != strip(&outputs[1].1) {
            failures.push(format!("{cmd}: manifests differ beyond the timestamp"));
        }
    }
    let detail = if failures.is_empty() {
        "simulate, price, converge, hedge, check: byte-identical csv".to_owned()
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        ("black-scholes recovery, closed form", bs_recovery_closed_form),
        ("black-scholes recovery, monte carlo", bs_recovery_mc),
        ("girsanov normalization", girsanov_normalization),
        ("discounted martingale", martingale_property),
        ("gap-closing convergence rate", convergence_rate),
        ("moment bound uniform in k", moment_uniformity),
        ("put-call parity", put_call_parity),
        ("positivity", positivity),
        ("hedge replication scaling", hedge_replication),
        ("tower consistency", tower_consistency),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Outcome {
            pass: false,
            detail: "panicked".into(),
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<38} {}  {}",
            i + 1,
            name,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
