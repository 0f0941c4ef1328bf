use alloc::vec;

use super::{h_function, integrated_variance, MarketConfig, PricingMethod, PricingResult};
use crate::engine::{
    continue_path, simulate_driven, simulate_gap_path_signed, simulate_sequence_signed, Model,
    SimulationConfig,
};
use crate::error::{Error, Result};
use crate::path::{require_steps, Measure, PathRecord, GRID_TOLERANCE};
use crate::stats::{collect_replicates, column_estimates, Runner};

fn replicate_count(cfg: &SimulationConfig) -> usize {
    if cfg.antithetic {
        2 * cfg.replicates.div_ceil(2)
    } else {
        cfg.replicates
    }
}

fn risk_neutral(cfg: &SimulationConfig, mkt: &MarketConfig) -> SimulationConfig {
    cfg.with_horizon(mkt.maturity)
        .with_measure(Measure::RiskNeutral { rate: mkt.rate })
}

/// Price at `t < T - l` as `exp(r t) E_Q[H(S~(T - l), -v/2, v) | F_t]`, where
/// `v` is the integrated variance over `[T - l, T]`, already known at
/// `T - l`. Paths run under the risk-neutral measure up to `T - l` only.
///
/// At `t = 0` the conditioning information is the initial path. For `t > 0`
/// a realized `prefix` reaching `t` must be supplied; it also replaces the
/// initial path when given at `t = 0`.
pub fn price_nested<R: Runner>(
    runner: &R,
    t: f64,
    prefix: Option<&PathRecord>,
    model: &Model<'_>,
    cfg: &SimulationConfig,
    mkt: &MarketConfig,
) -> Result<PricingResult> {
    mkt.validate()?;
    mkt.require_call()?;
    let maturity = mkt.maturity;
    let gap = cfg.gap;
    if maturity <= gap * (1.0 + GRID_TOLERANCE) {
        return Err(Error::InvalidParameter {
            name: "maturity",
            reason: "must exceed the gap; use the closed form on the last delay period",
        });
    }
    let switch = maturity - gap;
    if !(t >= 0.0 && t < switch - GRID_TOLERANCE * cfg.dt) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: "nested pricing needs t < T - l; use the closed form on the last delay period",
        });
    }
    require_steps("t", t, cfg.dt)?;
    let sim = risk_neutral(cfg, mkt).with_horizon(switch);
    sim.validate()?;
    model.check(sim.dt, sim.window)?;
    if t > 0.0 && prefix.is_none() {
        return Err(Error::InvalidParameter {
            name: "prefix",
            reason: "pricing at t > 0 needs the realized path up to t",
        });
    }
    let growth = mkt.bond(t);
    let discount_switch = mkt.discount(switch);

    let rows = collect_replicates(runner, sim.replicates, sim.antithetic, |stream, sign| {
        let path = match prefix {
            Some(p) => continue_path(p, t, model, &sim, stream, sign)?,
            None => simulate_gap_path_signed(model, &sim, stream, sign)?,
        };
        let sigma2 = integrated_variance(&path, switch, maturity, model.vol)?;
        let x = path.terminal() * discount_switch;
        Ok(vec![growth * h_function(x, -0.5 * sigma2, sigma2, mkt)?])
    })?;
    let est = column_estimates(&rows, 1)[0];
    Ok(PricingResult::from_estimate(
        &est,
        replicate_count(&sim),
        PricingMethod::NestedH,
    ))
}

/// Monte Carlo price at `t = 0` of the full-memory model approximated by
/// the `approx_k`-th member of the gap-closing sequence (gap `1/approx_k`).
/// Calls and puts follow `mkt.kind`.
pub fn price_full_memory_mc<R: Runner>(
    runner: &R,
    approx_k: usize,
    model: &Model<'_>,
    cfg: &SimulationConfig,
    mkt: &MarketConfig,
) -> Result<PricingResult> {
    mkt.validate()?;
    let sim = risk_neutral(cfg, mkt);
    let gap = crate::engine::sequence_gap(approx_k, sim.dt)?;
    sim.with_gap(gap).validate()?;
    model.check(sim.dt, sim.window)?;
    terminal_payoff_mc(runner, &sim, mkt, PricingMethod::FullMemoryMc, |stream, sign| {
        simulate_sequence_signed(approx_k, model, &sim, stream, sign)
    })
}

/// Monte Carlo price at `t = 0` under memory-gap dynamics with gap
/// `cfg.gap`. Calls and puts follow `mkt.kind`.
pub fn price_gap_mc<R: Runner>(
    runner: &R,
    model: &Model<'_>,
    cfg: &SimulationConfig,
    mkt: &MarketConfig,
) -> Result<PricingResult> {
    mkt.validate()?;
    let sim = risk_neutral(cfg, mkt);
    sim.validate()?;
    model.check(sim.dt, sim.window)?;
    let steps = require_steps("maturity", sim.horizon, sim.dt)?;
    terminal_payoff_mc(runner, &sim, mkt, PricingMethod::GapMc, |stream, sign| {
        let mut dw = crate::rng::increments(sim.seed, stream, sim.dt, steps);
        if sign < 0.0 {
            dw.iter_mut().for_each(|x| *x = -*x);
        }
        simulate_driven(model, &sim, sim.gap, dw)
    })
}

fn terminal_payoff_mc<R, F>(
    runner: &R,
    sim: &SimulationConfig,
    mkt: &MarketConfig,
    method: PricingMethod,
    simulate: F,
) -> Result<PricingResult>
where
    R: Runner,
    F: Fn(u64, f64) -> Result<PathRecord> + Sync + Send,
{
    let discount = mkt.discount(mkt.maturity);
    let rows = collect_replicates(runner, sim.replicates, sim.antithetic, |stream, sign| {
        let path = simulate(stream, sign)?;
        Ok(vec![discount * mkt.kind.payoff(path.terminal(), mkt.strike)])
    })?;
    let est = column_estimates(&rows, 1)[0];
    Ok(PricingResult::from_estimate(&est, replicate_count(sim), method))
}

#[cfg(test)]
mod tests {
    use super::super::{black_scholes, OptionKind};
    use super::*;
    use crate::functionals::FunctionalSpec;
    use crate::path::InitialPath;
    use crate::stats::Serial;

    fn constant_setup() -> (InitialPath, FunctionalSpec, FunctionalSpec) {
        (
            InitialPath::constant(100.0, 0.25, 0.0625).unwrap(),
            FunctionalSpec::constant(0.1).unwrap(),
            FunctionalSpec::constant(0.2).unwrap(),
        )
    }

    #[test]
    fn nested_rejects_last_delay_period() {
        let (theta, f, g) = constant_setup();
        let model = Model::new(&theta, &f, &g);
        let cfg = SimulationConfig::new(1.0, 0.25, 0.25, 0.0625).with_replicates(10);
        let mkt = MarketConfig::call(0.05, 100.0, 1.0).unwrap();
        assert!(price_nested(&Serial, 0.8, None, &model, &cfg, &mkt).is_err());
        assert!(price_nested(&Serial, 0.25, None, &model, &cfg, &mkt).is_err());
        let short = MarketConfig::call(0.05, 100.0, 0.25).unwrap();
        assert!(price_nested(&Serial, 0.0, None, &model, &cfg, &short).is_err());
    }

    #[test]
    fn nested_constant_coefficients_near_black_scholes() {
        let (theta, f, g) = constant_setup();
        let model = Model::new(&theta, &f, &g);
        let cfg = SimulationConfig::new(1.0, 0.25, 0.25, 0.0625)
            .with_replicates(20_000)
            .with_seed(5);
        let mkt = MarketConfig::call(0.05, 100.0, 1.0).unwrap();
        let res = price_nested(&Serial, 0.0, None, &model, &cfg, &mkt).unwrap();
        let bs = black_scholes(100.0, 100.0, 0.05, 0.2, 1.0).unwrap();
        assert!((res.price - bs).abs() <= 3.0 * res.std_error, "{res:?} vs {bs}");
        assert_eq!(res.method, PricingMethod::NestedH);
    }

    #[test]
    fn full_memory_zero_strike_limit() {
        let (theta, f, g) = constant_setup();
        let model = Model::new(&theta, &f, &g);
        let cfg = SimulationConfig::new(1.0, 0.25, 0.25, 0.0625)
            .with_replicates(20_000)
            .with_seed(9);
        let mkt = MarketConfig::call(0.05, 1e-9, 1.0).unwrap();
        let res = price_full_memory_mc(&Serial, 4, &model, &cfg, &mkt).unwrap();
        assert!((res.price - 100.0).abs() <= 3.0 * res.std_error);
    }

    #[test]
    fn antithetic_reports_even_replicates_and_lower_error() {
        let (theta, f, g) = constant_setup();
        let model = Model::new(&theta, &f, &g);
        let base = SimulationConfig::new(1.0, 0.25, 0.25, 0.0625)
            .with_replicates(4001)
            .with_seed(2);
        let mkt = MarketConfig::call(0.05, 100.0, 1.0).unwrap();
        let plain = price_gap_mc(&Serial, &model, &base, &mkt).unwrap();
        let anti = price_gap_mc(&Serial, &model, &base.with_antithetic(true), &mkt).unwrap();
        assert_eq!(anti.replicates, 4002);
        assert!(anti.std_error < plain.std_error);
    }

    #[test]
    fn put_kind_is_priced() {
        let (theta, f, g) = constant_setup();
        let model = Model::new(&theta, &f, &g);
        let cfg = SimulationConfig::new(1.0, 0.25, 0.25, 0.0625)
            .with_replicates(2000)
            .with_seed(1);
        let mkt = MarketConfig::call(0.05, 100.0, 1.0)
            .unwrap()
            .with_kind(OptionKind::Put);
        let put = price_gap_mc(&Serial, &model, &cfg, &mkt).unwrap();
        assert!(put.price > 0.0 && put.price < 100.0);
        assert!(price_nested(&Serial, 0.0, None, &model, &cfg, &mkt).is_err());
    }
}
