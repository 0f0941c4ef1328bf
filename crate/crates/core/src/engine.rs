//! Path simulation for the memory-gap model and the gap-closing sequence.
//!
//! At node `t_i` the coefficients read the segment ending at `t_i - l`,
//! which is already on the path because `l >= dt`. Over one step the
//! coefficients are frozen, so the exponential solution is exact for them:
//!
//! ```text
//! S(t_{i+1}) = S(t_i) * exp((a_i - b_i^2 / 2) dt + b_i dW_i)
//! ```
//!
//! with `a_i = f(t_i, S_{t_i - l})` under the physical measure and `a_i = r`
//! under the risk-neutral one, `b_i = g(t_i, S_{t_i - l})`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::functionals::FunctionalSpec;
use crate::path::{
    delayed_segment, extend_initial, require_steps, InitialPath, Measure, PathRecord,
    GRID_TOLERANCE,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    /// Horizon `T` in years.
    pub horizon: f64,
    /// Memory gap `l`.
    pub gap: f64,
    /// History window `L`.
    pub window: f64,
    pub dt: f64,
    pub measure: Measure,
    pub seed: u64,
    pub replicates: usize,
    pub antithetic: bool,
}

impl SimulationConfig {
    pub fn new(horizon: f64, gap: f64, window: f64, dt: f64) -> Self {
        Self {
            horizon,
            gap,
            window,
            dt,
            measure: Measure::Physical,
            seed: 0,
            replicates: 1,
            antithetic: false,
        }
    }

    pub fn with_measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_antithetic(mut self, antithetic: bool) -> Self {
        self.antithetic = antithetic;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.gap = gap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "must be positive and finite",
            });
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: "must be positive and finite",
            });
        }
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: "must be positive and finite",
            });
        }
        if !(self.gap.is_finite() && self.gap > 0.0) {
            return Err(Error::InvalidParameter {
                name: "gap",
                reason: "must be positive and finite",
            });
        }
        if self.gap < self.dt * (1.0 - GRID_TOLERANCE) {
            return Err(Error::InvalidParameter {
                name: "gap",
                reason: "must be at least one time step",
            });
        }
        require_steps("gap", self.gap, self.dt)?;
        require_steps("window", self.window, self.dt)?;
        require_steps("horizon", self.horizon, self.dt)?;
        if let Measure::RiskNeutral { rate } = self.measure {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "rate",
                    reason: "must be non-negative and finite",
                });
            }
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter {
                name: "replicates",
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

/// Initial path plus drift and volatility functionals.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    pub theta: &'a InitialPath,
    pub drift: &'a FunctionalSpec,
    pub vol: &'a FunctionalSpec,
}

impl<'a> Model<'a> {
    pub fn new(theta: &'a InitialPath, drift: &'a FunctionalSpec, vol: &'a FunctionalSpec) -> Self {
        Self { theta, drift, vol }
    }

    /// Checks that the model fits a grid with step `dt` and window `window`.
    pub fn check(&self, dt: f64, window: f64) -> Result<()> {
        if (self.theta.step() - dt).abs() > GRID_TOLERANCE * dt {
            return Err(Error::InvalidParameter {
                name: "initial path",
                reason: "sample spacing differs from dt",
            });
        }
        if require_steps("window", self.theta.window(), dt)? != require_steps("window", window, dt)? {
            return Err(Error::WindowMismatch {
                expected: window,
                found: self.theta.window(),
            });
        }
        for spec in [self.drift, self.vol] {
            if let Some(w) = spec.window() {
                if steps_differ(w, window, dt) {
                    return Err(Error::WindowMismatch {
                        expected: window,
                        found: w,
                    });
                }
            }
        }
        self.vol.require_positive_vol()
    }
}

fn steps_differ(a: f64, b: f64, dt: f64) -> bool {
    match (crate::path::steps_in(a, dt), crate::path::steps_in(b, dt)) {
        (Some(x), Some(y)) => x != y,
        _ => true,
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    dt: f64,
    gap_steps: usize,
    window_steps: usize,
    zero_index: usize,
}

/// Advances `prices` (which holds nodes up to `zero_index + from`) through
/// steps `from..to`. `dw[j]` is the increment of step `from + j`.
fn advance(
    prices: &mut Vec<f64>,
    layout: &Layout,
    from: usize,
    to: usize,
    model: &Model<'_>,
    measure: Measure,
    dw: &[f64],
) -> Result<()> {
    debug_assert_eq!(prices.len(), layout.zero_index + from + 1);
    prices.reserve(to - from);
    for (i, &dwi) in (from..to).zip(dw) {
        let node = layout.zero_index + i;
        let anchor = node - layout.gap_steps;
        let t = i as f64 * layout.dt;
        let seg = &prices[anchor - layout.window_steps..=anchor];
        let drift = match measure {
            Measure::Physical => model.drift.eval_unchecked(seg),
            Measure::RiskNeutral { rate } => rate,
        };
        let vol = model.vol.eval_unchecked(seg);
        if !drift.is_finite() || !vol.is_finite() {
            return Err(Error::NonFinite("coefficients"));
        }
        if vol <= 0.0 {
            return Err(Error::NonPositiveVolatility { t, value: vol });
        }
        let exponent = (drift - 0.5 * vol * vol) * layout.dt + vol * dwi;
        let next = prices[node] * libm::exp(exponent);
        if !(next.is_finite() && next > 0.0) {
            return Err(Error::NonFinite("price"));
        }
        prices.push(next);
    }
    Ok(())
}

/// Simulates on `[-extension - L, T]` driven by the given increments
/// (one per step on `[0, T]`). `extension` must be at least the gap.
pub fn simulate_driven(
    model: &Model<'_>,
    cfg: &SimulationConfig,
    extension: f64,
    increments: Vec<f64>,
) -> Result<PathRecord> {
    cfg.validate()?;
    model.check(cfg.dt, cfg.window)?;
    let layout_ext = require_steps("extension", extension, cfg.dt)?;
    let gap_steps = require_steps("gap", cfg.gap, cfg.dt)?;
    if layout_ext < gap_steps {
        return Err(Error::InvalidParameter {
            name: "extension",
            reason: "must cover the memory gap",
        });
    }
    let steps = require_steps("horizon", cfg.horizon, cfg.dt)?;
    if increments.len() != steps {
        return Err(Error::IncrementCount {
            expected: steps,
            found: increments.len(),
        });
    }
    let extended = extend_initial(model.theta, extension)?;
    let mut prices = extended.extended_values();
    let layout = Layout {
        dt: cfg.dt,
        gap_steps,
        window_steps: require_steps("window", cfg.window, cfg.dt)?,
        zero_index: prices.len() - 1,
    };
    advance(&mut prices, &layout, 0, steps, model, cfg.measure, &increments)?;
    Ok(PathRecord::from_simulation(
        cfg.dt,
        layout.zero_index,
        cfg.gap,
        cfg.window,
        prices,
        Some(increments),
        cfg.measure,
    ))
}

fn stream_increments(cfg: &SimulationConfig, stream: u64, sign: f64) -> Result<Vec<f64>> {
    let steps = require_steps("horizon", cfg.horizon, cfg.dt)?;
    let mut dw = rng::increments(cfg.seed, stream, cfg.dt, steps);
    if sign < 0.0 {
        dw.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(dw)
}

/// One path of the memory-gap model on Brownian stream `stream`.
pub fn simulate_gap_path(model: &Model<'_>, cfg: &SimulationConfig, stream: u64) -> Result<PathRecord> {
    simulate_driven(model, cfg, cfg.gap, stream_increments(cfg, stream, 1.0)?)
}

/// Antithetic-aware variant: `sign = -1.0` negates every increment.
pub fn simulate_gap_path_signed(
    model: &Model<'_>,
    cfg: &SimulationConfig,
    stream: u64,
    sign: f64,
) -> Result<PathRecord> {
    simulate_driven(model, cfg, cfg.gap, stream_increments(cfg, stream, sign)?)
}

/// Gap `1/k` for the `k`-th member of the gap-closing sequence.
pub fn sequence_gap(k: usize, dt: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "must be at least 1",
        });
    }
    let gap = 1.0 / k as f64;
    if gap < dt * (1.0 - GRID_TOLERANCE) {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "1/k is shorter than one time step",
        });
    }
    require_steps("1/k", gap, dt)?;
    Ok(gap)
}

/// `k`-th approximation of the full-memory model: gap `1/k`, initial path
/// extended over `[-1 - L, -L]`.
pub fn simulate_gap_sequence(
    k: usize,
    model: &Model<'_>,
    cfg: &SimulationConfig,
    stream: u64,
) -> Result<PathRecord> {
    simulate_sequence_signed(k, model, cfg, stream, 1.0)
}

pub(crate) fn simulate_sequence_signed(
    k: usize,
    model: &Model<'_>,
    cfg: &SimulationConfig,
    stream: u64,
    sign: f64,
) -> Result<PathRecord> {
    let gap = sequence_gap(k, cfg.dt)?;
    let cfg = cfg.with_gap(gap);
    simulate_driven(model, &cfg, 1.0, stream_increments(&cfg, stream, sign)?)
}

/// Sequence members for every `k` in `k_list`, all driven by the same
/// increments of stream `stream`.
pub fn coupled_paths(
    k_list: &[usize],
    model: &Model<'_>,
    cfg: &SimulationConfig,
    stream: u64,
) -> Result<Vec<PathRecord>> {
    coupled_paths_signed(k_list, model, cfg, stream, 1.0)
}

pub(crate) fn coupled_paths_signed(
    k_list: &[usize],
    model: &Model<'_>,
    cfg: &SimulationConfig,
    stream: u64,
    sign: f64,
) -> Result<Vec<PathRecord>> {
    let gaps = k_list
        .iter()
        .map(|&k| sequence_gap(k, cfg.dt))
        .collect::<Result<Vec<_>>>()?;
    let dw = stream_increments(cfg, stream, sign)?;
    gaps.into_iter()
        .map(|gap| simulate_driven(model, &cfg.with_gap(gap), 1.0, dw.clone()))
        .collect()
}

/// Continues a realized prefix from time `t` to `cfg.horizon` on stream
/// `stream`. The prefix's history before zero must cover the gap and window.
pub fn continue_path(
    prefix: &PathRecord,
    t: f64,
    model: &Model<'_>,
    cfg: &SimulationConfig,
    stream: u64,
    sign: f64,
) -> Result<PathRecord> {
    cfg.validate()?;
    model.check(cfg.dt, cfg.window)?;
    if (prefix.step() - cfg.dt).abs() > GRID_TOLERANCE * cfg.dt {
        return Err(Error::InvalidParameter {
            name: "prefix",
            reason: "sample spacing differs from dt",
        });
    }
    let layout = Layout {
        dt: cfg.dt,
        gap_steps: require_steps("gap", cfg.gap, cfg.dt)?,
        window_steps: require_steps("window", cfg.window, cfg.dt)?,
        zero_index: prefix.zero_index(),
    };
    if layout.zero_index < layout.gap_steps + layout.window_steps {
        return Err(Error::InvalidParameter {
            name: "prefix",
            reason: "history before time zero is shorter than gap + window",
        });
    }
    if t < 0.0 {
        return Err(Error::OutOfRange {
            t,
            start: 0.0,
            end: prefix.horizon(),
        });
    }
    let end = prefix.index_of(t)?;
    let from = end - layout.zero_index;
    let steps = require_steps("horizon", cfg.horizon, cfg.dt)?;
    if from > steps {
        return Err(Error::OutOfRange {
            t,
            start: 0.0,
            end: cfg.horizon,
        });
    }
    let mut dw = rng::increments(cfg.seed, stream, cfg.dt, steps - from);
    if sign < 0.0 {
        dw.iter_mut().for_each(|x| *x = -*x);
    }
    let mut prices = prefix.prices()[..=end].to_vec();
    advance(&mut prices, &layout, from, steps, model, cfg.measure, &dw)?;
    let increments = prefix.increments().map(|known| {
        let mut all = known[..from].to_vec();
        all.extend_from_slice(&dw);
        all
    });
    Ok(PathRecord::from_simulation(
        cfg.dt,
        layout.zero_index,
        cfg.gap,
        cfg.window,
        prices,
        increments,
        cfg.measure,
    ))
}

/// Radon-Nikodym density `dQ/dP` on `[0, T]` for one physical path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GirsanovWeight {
    pub log_value: f64,
}

impl GirsanovWeight {
    pub fn value(&self) -> f64 {
        libm::exp(self.log_value)
    }
}

/// `log rho(T) = -sum X_i dW_i - 1/2 sum X_i^2 dt` with market price of risk
/// `X_i = (f_i - r) / g_i` read on the delayed segments of `path`.
pub fn girsanov_weight(
    path: &PathRecord,
    drift: &FunctionalSpec,
    vol: &FunctionalSpec,
    rate: f64,
) -> Result<GirsanovWeight> {
    if path.measure() != Measure::Physical {
        return Err(Error::WrongMeasure("girsanov weights need a physical path"));
    }
    let dw = path.increments().ok_or(Error::MissingIncrements)?;
    let dt = path.step();
    let gap_steps = require_steps("gap", path.gap(), dt)?;
    let window_steps = require_steps("window", path.window(), dt)?;
    let prices = path.prices();
    let zero = path.zero_index();
    let mut stochastic = 0.0;
    let mut quadratic = 0.0;
    for (i, &dwi) in dw.iter().enumerate() {
        let anchor = zero + i - gap_steps;
        let t = i as f64 * dt;
        let seg = delayed_segment(prices, anchor, window_steps, t - path.gap(), dt);
        let f = drift.eval(t, &seg)?;
        let g = vol.eval(t, &seg)?;
        if g <= 0.0 {
            return Err(Error::NonPositiveVolatility { t, value: g });
        }
        let x = (f - rate) / g;
        stochastic += x * dwi;
        quadratic += x * x * dt;
    }
    let log_value = -stochastic - 0.5 * quadratic;
    if !log_value.is_finite() {
        return Err(Error::NonFinite("girsanov weight"));
    }
    Ok(GirsanovWeight { log_value })
}
