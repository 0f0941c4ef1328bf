//! European option prices and hedges.
//!
//! On the last delay period `[T - l, T]` the integrated variance of the
//! remaining life is already known, which gives a Black-Scholes type closed
//! form with the variance replaced by `integral g^2 du`. Before that, the
//! price is a risk-neutral expectation of the closed form evaluated at
//! `T - l` ([`price_nested`]), or a plain Monte Carlo over terminal payoffs
//! ([`price_full_memory_mc`], [`price_gap_mc`]).

mod closed_form;
mod hedge;
mod monte_carlo;

pub use closed_form::{
    closed_form_last_delay, h_function, integrated_variance, LastDelayPrice,
};
pub use hedge::{hedge_replication_backtest, HedgeOutcome};
pub use monte_carlo::{price_full_memory_mc, price_gap_mc, price_nested};

use crate::error::{Error, Result};
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptionKind {
    #[default]
    Call,
    Put,
}

impl OptionKind {
    pub fn payoff(&self, spot: f64, strike: f64) -> f64 {
        match self {
            OptionKind::Call => (spot - strike).max(0.0),
            OptionKind::Put => (strike - spot).max(0.0),
        }
    }
}

/// Short rate, strike and maturity. The bond is `B(t) = exp(r t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketConfig {
    pub rate: f64,
    pub strike: f64,
    pub maturity: f64,
    pub kind: OptionKind,
}

impl MarketConfig {
    pub fn call(rate: f64, strike: f64, maturity: f64) -> Result<Self> {
        let mkt = Self {
            rate,
            strike,
            maturity,
            kind: OptionKind::Call,
        };
        mkt.validate()?;
        Ok(mkt)
    }

    pub fn with_kind(mut self, kind: OptionKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "rate",
                reason: "must be non-negative and finite",
            });
        }
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(Error::InvalidParameter {
                name: "strike",
                reason: "must be positive",
            });
        }
        if !(self.maturity.is_finite() && self.maturity > 0.0) {
            return Err(Error::InvalidParameter {
                name: "maturity",
                reason: "must be positive",
            });
        }
        Ok(())
    }

    pub fn bond(&self, t: f64) -> f64 {
        libm::exp(self.rate * t)
    }

    pub fn discount(&self, tau: f64) -> f64 {
        libm::exp(-self.rate * tau)
    }

    fn require_call(&self) -> Result<()> {
        match self.kind {
            OptionKind::Call => Ok(()),
            OptionKind::Put => Err(Error::Unsupported(
                "the closed form and nested pricers value calls only",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PricingMethod {
    ClosedForm,
    NestedH,
    FullMemoryMc,
    GapMc,
    BlackScholes,
}

impl PricingMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PricingMethod::ClosedForm => "closed_form",
            PricingMethod::NestedH => "nested_h",
            PricingMethod::FullMemoryMc => "full_memory_mc",
            PricingMethod::GapMc => "gap_mc",
            PricingMethod::BlackScholes => "black_scholes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingResult {
    pub price: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub replicates: usize,
    pub method: PricingMethod,
}

impl PricingResult {
    pub fn exact(price: f64, method: PricingMethod) -> Self {
        Self {
            price,
            std_error: 0.0,
            ci95: (price, price),
            replicates: 0,
            method,
        }
    }

    pub fn from_estimate(est: &Estimate, replicates: usize, method: PricingMethod) -> Self {
        Self {
            price: est.mean,
            std_error: est.std_error,
            ci95: est.ci95(),
            replicates,
            method,
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.price,
            std_error: self.std_error,
            samples: self.replicates,
        }
    }
}

/// Stock and bond units of the replicating portfolio at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgePosition {
    pub stock_units: f64,
    pub bond_units: f64,
    pub time: f64,
}

impl HedgePosition {
    pub fn value(&self, spot: f64, rate: f64) -> f64 {
        self.stock_units * spot + self.bond_units * libm::exp(rate * self.time)
    }
}

/// Standard normal distribution function, `erfc(-x / sqrt 2) / 2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Classical Black-Scholes call price.
pub fn black_scholes(spot: f64, strike: f64, rate: f64, sigma: f64, tau: f64) -> Result<f64> {
    for (name, v) in [("spot", spot), ("strike", strike), ("sigma", sigma), ("tau", tau)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                reason: "must be positive and finite",
            });
        }
    }
    if !rate.is_finite() {
        return Err(Error::NonFinite("rate"));
    }
    let vol = sigma * libm::sqrt(tau);
    let d1 = (libm::log(spot / strike) + (rate + 0.5 * sigma * sigma) * tau) / vol;
    let d2 = d1 - vol;
    Ok(spot * normal_cdf(d1) - strike * libm::exp(-rate * tau) * normal_cdf(d2))
}
