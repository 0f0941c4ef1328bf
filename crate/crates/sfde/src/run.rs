//! Command execution.

use sfde_core::diagnostics::{
    convergence_study, martingale_check, moment_bound_check, normalization_check,
};
use sfde_core::engine::{simulate_gap_path, simulate_gap_sequence};
use sfde_core::path::{extend_initial, steps_in};
use sfde_core::pricing::{
    black_scholes, closed_form_last_delay, hedge_replication_backtest, integrated_variance,
    price_full_memory_mc, price_gap_mc, price_nested, PricingMethod,
};
use sfde_core::rng::GENERATOR;
use sfde_core::{Estimate, Measure, Model, PathRecord, PricingResult, Runner};

use crate::config::{memoryless_value, Command, ConfigError, RunConfig};
use crate::io::{checks_csv, convergence_csv, hedge_csv, path_csv, pricing_csv};
use crate::manifest::Manifest;
use crate::runner::Parallel;

/// CSV body plus its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv: String,
    pub manifest: Manifest,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] sfde_core::Error),
}

impl RunError {
    /// 1 for invalid input, 2 for numerical failures such as a breached
    /// volatility floor.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Model(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Artifacts, RunError> {
    let command = cfg.command.ok_or_else(|| ConfigError {
        violations: vec!["no command given".into()],
    })?;
    cfg.validate_command(command)?;
    let mut manifest = Manifest::new(command.name(), cfg.to_toml());
    manifest.int("seed", cfg.simulation.seed);
    manifest.int("stream", cfg.stream);
    manifest.text("generator", GENERATOR);
    let model = Model::new(&cfg.initial, &cfg.drift, &cfg.vol);
    let csv = match command {
        Command::Simulate => simulate(cfg, &model, &mut manifest)?,
        Command::Price => price(cfg, &model, &mut manifest)?,
        Command::Converge => converge(cfg, &model, &mut manifest)?,
        Command::Hedge => hedge(cfg, &model, &mut manifest)?,
        Command::Check => check(cfg, &model, &mut manifest)?,
    };
    Ok(Artifacts { csv, manifest })
}

fn simulate(cfg: &RunConfig, model: &Model<'_>, manifest: &mut Manifest) -> Result<String, RunError> {
    let sim = &cfg.simulation;
    let path = match cfg.sequence_k {
        Some(k) => simulate_gap_sequence(k, model, sim, cfg.stream)?,
        None => simulate_gap_path(model, sim, cfg.stream)?,
    };
    manifest.text("measure", sim.measure.tag());
    manifest.int("samples", path.prices().len() as u64);
    manifest.float("terminal", path.terminal());
    Ok(path_csv(&path))
}

/// The realized information at the pricing time: the prefix file, or the
/// initial path (with its constant extension) at `t = 0`.
fn observed_path(cfg: &RunConfig) -> Result<PathRecord, RunError> {
    if let Some(p) = &cfg.pricing.prefix {
        return Ok(p.clone());
    }
    let sim = &cfg.simulation;
    let extended = extend_initial(&cfg.initial, sim.gap)?;
    let values = extended.extended_values();
    let zero = steps_in(sim.gap + sim.window, sim.dt).unwrap_or(values.len() - 1);
    Ok(PathRecord::from_parts(
        sim.dt,
        zero,
        sim.gap,
        sim.window,
        values,
        None,
        Measure::Physical,
    )?)
}

fn price(cfg: &RunConfig, model: &Model<'_>, manifest: &mut Manifest) -> Result<String, RunError> {
    let mkt = &cfg.market;
    let t = cfg.pricing.t;
    let tau = mkt.maturity - t;
    let method = cfg.resolved_method();
    let result = match method {
        PricingMethod::ClosedForm => {
            let path = observed_path(cfg)?;
            let spot = path.value_at(t)?;
            let sigma2 = match memoryless_value(&cfg.vol) {
                Some(g) => g * g * tau,
                None => integrated_variance(&path, t, mkt.maturity, &cfg.vol)?,
            };
            let lp = closed_form_last_delay(spot, sigma2, tau, mkt)?;
            manifest.float("integrated_variance", sigma2);
            manifest.float("stock_units", lp.hedge.stock_units);
            manifest.float("bond_units", lp.hedge.bond_units);
            manifest.flag("degenerate", lp.degenerate);
            lp.result
        }
        PricingMethod::BlackScholes => {
            let spot = observed_path(cfg)?.value_at(t)?;
            let sigma = memoryless_value(&cfg.vol).unwrap_or(f64::NAN);
            PricingResult::exact(
                black_scholes(spot, mkt.strike, mkt.rate, sigma, tau)?,
                PricingMethod::BlackScholes,
            )
        }
        PricingMethod::NestedH => price_nested(
            &Parallel,
            t,
            cfg.pricing.prefix.as_ref(),
            model,
            &cfg.simulation,
            mkt,
        )?,
        PricingMethod::FullMemoryMc => {
            let k = cfg.pricing.approx_k.unwrap_or(1);
            manifest.int("approx_k", k as u64);
            price_full_memory_mc(&Parallel, k, model, &cfg.simulation, mkt)?
        }
        PricingMethod::GapMc => price_gap_mc(&Parallel, model, &cfg.simulation, mkt)?,
    };
    if let Some(h) = &cfg.pricing.prefix_sha256 {
        manifest.text("prefix_sha256", h);
    }
    manifest.text("method", method.name());
    manifest.float("price", result.price);
    manifest.float("std_error", result.std_error);
    Ok(pricing_csv(&result, cfg.simulation.seed))
}

fn converge(cfg: &RunConfig, model: &Model<'_>, manifest: &mut Manifest) -> Result<String, RunError> {
    let report = convergence_study(
        &Parallel,
        &cfg.converge.k_values,
        cfg.converge.beta,
        model,
        &cfg.simulation,
    )?;
    match report.fitted_slope {
        Some(s) => manifest.float("fitted_slope", s),
        None => manifest.text("fitted_slope", "none"),
    }
    manifest.float("theoretical_slope", report.theoretical_slope);
    manifest.flag("degenerate", report.degenerate);
    let slope_ok = report.slope_ok();
    let monotone = report.monotone_within(2.0);
    manifest.flag("slope_pass", slope_ok);
    manifest.flag("monotone_pass", monotone);
    manifest.flag("pass", slope_ok && monotone);
    Ok(convergence_csv(&report))
}

fn hedge(cfg: &RunConfig, model: &Model<'_>, manifest: &mut Manifest) -> Result<String, RunError> {
    let mkt = &cfg.market;
    let sim = cfg.simulation.with_horizon(mkt.maturity);
    let outcomes = Parallel
        .map(sim.replicates, |i| {
            let path = simulate_gap_path(model, &sim, i as u64)?;
            hedge_replication_backtest(&path, cfg.hedge.rebalance_dt, mkt, &cfg.vol)
        })
        .into_iter()
        .collect::<sfde_core::Result<Vec<_>>>()?;
    let errors: Vec<f64> = outcomes.iter().map(|o| o.terminal_error).collect();
    let squares: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let est = Estimate::from_samples(&errors);
    let rms = Estimate::from_samples(&squares).mean.sqrt();
    manifest.text("measure", sim.measure.tag());
    manifest.int("paths", outcomes.len() as u64);
    manifest.float("rebalance_dt", cfg.hedge.rebalance_dt);
    if let Some(o) = outcomes.first() {
        manifest.float("start", o.start);
        manifest.int("rebalances", o.rebalances as u64);
        manifest.float("initial_price", o.initial_price);
    }
    manifest.float("rms_error", rms);
    manifest.float("mean_error", est.mean);
    manifest.float("mean_error_std_error", est.std_error);
    Ok(hedge_csv(&outcomes))
}

fn check(cfg: &RunConfig, model: &Model<'_>, manifest: &mut Manifest) -> Result<String, RunError> {
    let mkt = &cfg.market;
    let sim = &cfg.simulation;
    let norm = normalization_check(&Parallel, model, mkt.rate, sim)?;
    let mart = martingale_check(&Parallel, model, sim, mkt)?;
    let moment = match &cfg.check.k_values {
        Some(ks) => Some(moment_bound_check(&Parallel, ks, cfg.check.gamma, model, sim)?),
        None => None,
    };
    let mart_pass = mart.iter().all(|c| c.pass);
    manifest.flag("normalization_pass", norm.pass);
    manifest.float("normalization_estimate", norm.estimate.mean);
    manifest.float("normalization_std_error", norm.estimate.std_error);
    manifest.flag("martingale_pass", mart_pass);
    let mut pass = norm.pass && mart_pass;
    if let Some(m) = &moment {
        manifest.flag("moment_pass", m.pass);
        manifest.float("moment_ratio", m.ratio);
        pass &= m.pass;
    }
    manifest.flag("pass", pass);
    let mut checks = vec![norm];
    checks.extend(mart);
    Ok(checks_csv(&checks, moment.as_ref()))
}
