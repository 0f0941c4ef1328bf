use super::{closed_form_last_delay, integrated_variance, MarketConfig};
use crate::error::{Error, Result};
use crate::functionals::FunctionalSpec;
use crate::path::{require_steps, PathRecord, GRID_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeOutcome {
    /// Start of the hedge, `max(T - l, 0)`.
    pub start: f64,
    pub initial_price: f64,
    pub terminal_wealth: f64,
    pub payoff: f64,
    /// `terminal_wealth - payoff`.
    pub terminal_error: f64,
    pub rebalances: usize,
}

/// Runs the self-financing closed-form hedge along `path` over the last
/// delay period.
///
/// The portfolio starts with the closed-form price at `max(T - l, 0)` and
/// holds `Phi(beta+)` shares between rebalance dates, so in discounted terms
/// the wealth moves by `units * dS~`. The path must reach `T`.
pub fn hedge_replication_backtest(
    path: &PathRecord,
    rebalance_dt: f64,
    mkt: &MarketConfig,
    vol: &FunctionalSpec,
) -> Result<HedgeOutcome> {
    mkt.validate()?;
    let maturity = mkt.maturity;
    let dt = path.step();
    if path.horizon() < maturity * (1.0 - GRID_TOLERANCE) {
        return Err(Error::InvalidParameter {
            name: "path",
            reason: "must reach the maturity",
        });
    }
    let start = (maturity - path.gap()).max(0.0);
    let per_rebalance = require_steps("rebalance_dt", rebalance_dt, dt)?;
    if per_rebalance == 0 {
        return Err(Error::InvalidParameter {
            name: "rebalance_dt",
            reason: "must be positive",
        });
    }
    let rebalances = require_steps("hedge window", maturity - start, rebalance_dt)?;
    if rebalances == 0 {
        return Err(Error::InvalidParameter {
            name: "hedge window",
            reason: "the last delay period is empty",
        });
    }
    let start_index = path.index_of(start)?;
    let prices = path.prices();
    let discounted = |i: usize| prices[i] * mkt.discount((i - path.zero_index()) as f64 * dt);

    let sigma2 = integrated_variance(path, start, maturity, vol)?;
    let initial = closed_form_last_delay(prices[start_index], sigma2, maturity - start, mkt)?;
    let mut wealth = initial.result.price * mkt.discount(start);
    let mut index = start_index;
    for j in 0..rebalances {
        let t = start + (j * per_rebalance) as f64 * dt;
        let sigma2 = integrated_variance(path, t, maturity, vol)?;
        let units = closed_form_last_delay(prices[index], sigma2, maturity - t, mkt)?
            .hedge
            .stock_units;
        let next = index + per_rebalance;
        wealth += units * (discounted(next) - discounted(index));
        index = next;
    }
    let terminal_wealth = wealth * mkt.bond(maturity);
    let payoff = mkt.kind.payoff(prices[index], mkt.strike);
    Ok(HedgeOutcome {
        start,
        initial_price: initial.result.price,
        terminal_wealth,
        payoff,
        terminal_error: terminal_wealth - payoff,
        rebalances,
    })
}
