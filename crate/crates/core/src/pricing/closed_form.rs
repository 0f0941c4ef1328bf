use super::{normal_cdf, HedgePosition, MarketConfig, PricingMethod, PricingResult};
use crate::error::{Error, Result};
use crate::functionals::FunctionalSpec;
use crate::path::{delayed_segment, require_steps, PathRecord, GRID_TOLERANCE};

/// `integral_t^T g(u, S_{u-l})^2 du` as a left-endpoint sum on the path grid.
///
/// Only defined on the last delay period `t >= T - l`, where every segment
/// the integrand reads ends at or before `t`. The path must reach `t`.
pub fn integrated_variance(
    path: &PathRecord,
    t: f64,
    maturity: f64,
    vol: &FunctionalSpec,
) -> Result<f64> {
    let dt = path.step();
    let gap = path.gap();
    let maturity_steps = require_steps("maturity", maturity, dt)?;
    if t < 0.0 || t > maturity * (1.0 + GRID_TOLERANCE) {
        return Err(Error::OutOfRange {
            t,
            start: 0.0,
            end: maturity,
        });
    }
    let t_steps = require_steps("t", t, dt)?;
    let gap_steps = require_steps("gap", gap, dt)?;
    if t_steps + gap_steps < maturity_steps {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: "precedes the last delay period [T - l, T]",
        });
    }
    if path.horizon() < t - GRID_TOLERANCE * dt {
        return Err(Error::OutOfRange {
            t,
            start: 0.0,
            end: path.horizon(),
        });
    }
    let window_steps = require_steps("window", path.window(), dt)?;
    let zero = path.zero_index();
    let mut total = 0.0;
    for i in t_steps..maturity_steps {
        let u = i as f64 * dt;
        let seg = delayed_segment(path.prices(), zero + i - gap_steps, window_steps, u - gap, dt);
        let g = vol.eval(u, &seg)?;
        total += g * g * dt;
    }
    Ok(total)
}

/// Closed-form price on the last delay period together with its hedge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LastDelayPrice {
    pub result: PricingResult,
    pub hedge: HedgePosition,
    /// Set when the remaining integrated variance is zero; the price is then
    /// the intrinsic bound `max(0, s - K exp(-r tau))`.
    pub degenerate: bool,
}

/// Call price `s Phi(beta+) - K exp(-r tau) Phi(beta-)` with
/// `beta+- = (ln(s/K) + r tau +- sigma2/2) / sqrt(sigma2)`, valued at
/// `t = T - tau`. The hedge holds `Phi(beta+)` shares and
/// `-K exp(-r T) Phi(beta-)` bonds.
pub fn closed_form_last_delay(
    spot: f64,
    sigma2: f64,
    tau: f64,
    mkt: &MarketConfig,
) -> Result<LastDelayPrice> {
    mkt.validate()?;
    mkt.require_call()?;
    if !(spot.is_finite() && spot > 0.0) {
        return Err(Error::InvalidParameter {
            name: "spot",
            reason: "must be positive",
        });
    }
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "integrated variance",
            reason: "must be non-negative",
        });
    }
    if !(tau.is_finite() && tau >= 0.0 && tau <= mkt.maturity * (1.0 + GRID_TOLERANCE)) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: "must lie in [0, T]",
        });
    }
    let t = mkt.maturity - tau;
    let strike_pv = mkt.strike * mkt.discount(tau);
    let bond_strike = mkt.strike * mkt.discount(mkt.maturity);
    let moneyness = libm::log(spot / mkt.strike) + mkt.rate * tau;

    if sigma2 == 0.0 {
        let units = if moneyness > 0.0 { 1.0 } else { 0.0 };
        let price = units * (spot - strike_pv);
        return Ok(LastDelayPrice {
            result: PricingResult::exact(price, PricingMethod::ClosedForm),
            hedge: HedgePosition {
                stock_units: units,
                bond_units: -bond_strike * units,
                time: t,
            },
            degenerate: true,
        });
    }

    let sd = libm::sqrt(sigma2);
    let beta_plus = (moneyness + 0.5 * sigma2) / sd;
    let beta_minus = (moneyness - 0.5 * sigma2) / sd;
    let (phi_plus, phi_minus) = (normal_cdf(beta_plus), normal_cdf(beta_minus));
    let price = spot * phi_plus - strike_pv * phi_minus;
    Ok(LastDelayPrice {
        result: PricingResult::exact(price, PricingMethod::ClosedForm),
        hedge: HedgePosition {
            stock_units: phi_plus,
            bond_units: -bond_strike * phi_minus,
            time: t,
        },
        degenerate: false,
    })
}

/// `H(x, m, s2) = x e^{m + s2/2} Phi((s2 + ln(x/K) + rT + m) / s)
///              - K e^{-rT} Phi((ln(x/K) + rT + m) / s)` with `s = sqrt(s2)`.
///
/// With `x` the discounted price at `t` and `m = -s2/2`, `exp(r t) H` is the
/// call price at `t`.
pub fn h_function(x: f64, m: f64, sigma2: f64, mkt: &MarketConfig) -> Result<f64> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma2",
            reason: "must be positive",
        });
    }
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: "must be positive",
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("m"));
    }
    let sd = libm::sqrt(sigma2);
    let lower = (libm::log(x / mkt.strike) + mkt.rate * mkt.maturity + m) / sd;
    Ok(x * libm::exp(m + 0.5 * sigma2) * normal_cdf(lower + sd)
        - mkt.strike * mkt.discount(mkt.maturity) * normal_cdf(lower))
}
