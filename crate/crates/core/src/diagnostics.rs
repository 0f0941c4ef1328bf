//! Empirical checks of the model's analytic properties.
//!
//! Every pass/fail decision is made in units of estimated standard error or
//! as a ratio of estimates, never against an absolute epsilon on a
//! stochastic quantity.

use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{coupled_paths_signed, sequence_gap, simulate_gap_path_signed, Model, SimulationConfig};
use crate::error::{Error, Result};
use crate::path::{require_steps, InitialPath, Measure};
use crate::pricing::MarketConfig;
use crate::rng::NormalStream;
use crate::stats::{collect_replicates, column_estimates, Estimate, Runner};

/// Allowed excess of the fitted convergence slope over `-2 beta`.
pub const SLOPE_TOLERANCE: f64 = 0.5;
/// Maximum max/min ratio of a statistic that should be uniform in `k`.
pub const UNIFORMITY_RATIO: f64 = 2.0;
/// Standard errors allowed between an estimate and its exact target.
pub const SE_MULTIPLE: f64 = 3.0;

/// Recipe for a strictly positive, Hölder-continuous random initial path:
/// `level * exp(log_scale * B(s + L))` for a Brownian motion `B` started at
/// zero on `[-L, 0]`. Brownian paths are Hölder of every order below 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderInitialPath {
    pub beta: f64,
    pub seed: u64,
    pub window: f64,
    pub level: f64,
    pub log_scale: f64,
}

impl HolderInitialPath {
    pub fn new(beta: f64, seed: u64, window: f64, level: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 0.5) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: "must lie in (0, 1/2)",
            });
        }
        if !(level.is_finite() && level > 0.0) {
            return Err(Error::InvalidParameter {
                name: "level",
                reason: "must be positive",
            });
        }
        Ok(Self {
            beta,
            seed,
            window,
            level,
            log_scale: 0.2,
        })
    }

    pub fn with_log_scale(mut self, log_scale: f64) -> Self {
        self.log_scale = log_scale;
        self
    }

    pub fn generate(&self, step: f64) -> Result<InitialPath> {
        let n = require_steps("window", self.window, step)?;
        // last stream id, kept apart from the per-replicate streams
        let mut normals = NormalStream::new(self.seed, u64::MAX);
        let sd = libm::sqrt(step);
        let mut b = 0.0;
        let mut values = Vec::with_capacity(n + 1);
        values.push(self.level);
        for _ in 0..n {
            b += sd * normals.next_standard();
            values.push(self.level * libm::exp(self.log_scale * b));
        }
        InitialPath::new(self.window, step, values)
    }
}

/// Shorthand for [`HolderInitialPath::new`] followed by `generate`.
pub fn make_holder_path(
    beta: f64,
    seed: u64,
    window: f64,
    level: f64,
    step: f64,
) -> Result<InitialPath> {
    HolderInitialPath::new(beta, seed, window, level)?.generate(step)
}

/// `max |theta(t) - theta(s)| / |t - s|^exponent` over all grid pairs.
pub fn holder_ratio(theta: &InitialPath, exponent: f64) -> f64 {
    let v = theta.values();
    let h = theta.step();
    let mut best: f64 = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let lag = (j - i) as f64 * h;
            best = best.max((v[j] - v[i]).abs() / libm::pow(lag, exponent));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub k_values: Vec<usize>,
    /// Estimates of `E sup_{[0,T]} |S^k - S^{2k}|^2`, one per `k`.
    pub discrepancies: Vec<Estimate>,
    /// Least-squares slope of `ln discrepancy` against `ln k`; `None` when
    /// some discrepancy is zero.
    pub fitted_slope: Option<f64>,
    /// `-2 beta`.
    pub theoretical_slope: f64,
    pub replicates: usize,
    pub seed: u64,
    /// All discrepancies vanish (coefficients without memory).
    pub degenerate: bool,
}

impl ConvergenceReport {
    /// Fitted slope is at most `-2 beta + SLOPE_TOLERANCE`. A degenerate
    /// study passes trivially.
    pub fn slope_ok(&self) -> bool {
        if self.degenerate {
            return true;
        }
        self.fitted_slope
            .is_some_and(|s| s <= self.theoretical_slope + SLOPE_TOLERANCE)
    }

    /// Discrepancies never increase by more than `multiple` combined SEs.
    pub fn monotone_within(&self, multiple: f64) -> bool {
        self.discrepancies.windows(2).all(|w| {
            w[1].mean <= w[0].mean + multiple * crate::stats::combined_se(&w[0], &w[1])
        })
    }
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

fn require_bounded(model: &Model<'_>) -> Result<()> {
    if model.drift.bounds().is_none() || model.vol.bounds().is_none() {
        return Err(Error::InvalidParameter {
            name: "functionals",
            reason: "drift and volatility need declared bounds",
        });
    }
    Ok(())
}

fn check_k_values(k_values: &[usize], min_len: usize, dt: f64) -> Result<()> {
    if k_values.len() < min_len {
        return Err(Error::InvalidParameter {
            name: "k_values",
            reason: "too few values",
        });
    }
    if k_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "k_values",
            reason: "must be strictly increasing",
        });
    }
    for &k in k_values {
        sequence_gap(k, dt)?;
    }
    Ok(())
}

/// Estimates `E sup_{[0,T]} |S^k - S^{2k}|^2` on coupled paths for each `k`
/// and fits the log-log slope against `k`.
pub fn convergence_study<R: Runner>(
    runner: &R,
    k_values: &[usize],
    beta: f64,
    model: &Model<'_>,
    cfg: &SimulationConfig,
) -> Result<ConvergenceReport> {
    check_k_values(k_values, 3, cfg.dt)?;
    for &k in k_values {
        sequence_gap(2 * k, cfg.dt)?;
    }
    require_bounded(model)?;
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: "must lie in (0, 1/2)",
        });
    }
    let mut all: Vec<usize> = k_values.iter().flat_map(|&k| [k, 2 * k]).collect();
    all.sort_unstable();
    all.dedup();
    let position = |k: usize| all.iter().position(|&x| x == k).unwrap_or(0);

    let rows = collect_replicates(runner, cfg.replicates, cfg.antithetic, |stream, sign| {
        let paths = coupled_paths_signed(&all, model, cfg, stream, sign)?;
        Ok(k_values
            .iter()
            .map(|&k| {
                let coarse = paths[position(k)].forward_prices();
                let fine = paths[position(2 * k)].forward_prices();
                coarse
                    .iter()
                    .zip(fine)
                    .map(|(a, b)| (a - b) * (a - b))
                    .fold(0.0, f64::max)
            })
            .collect())
    })?;
    let discrepancies = column_estimates(&rows, k_values.len());
    let degenerate = discrepancies.iter().all(|e| e.mean == 0.0);
    let fitted_slope = if discrepancies.iter().all(|e| e.mean > 0.0) {
        let x: Vec<f64> = k_values.iter().map(|&k| libm::log(k as f64)).collect();
        let y: Vec<f64> = discrepancies.iter().map(|e| libm::log(e.mean)).collect();
        fit_slope(&x, &y)
    } else {
        None
    };
    Ok(ConvergenceReport {
        k_values: k_values.to_vec(),
        discrepancies,
        fitted_slope,
        theoretical_slope: -2.0 * beta,
        replicates: cfg.replicates,
        seed: cfg.seed,
        degenerate,
    })
}

/// An estimate compared with an exact target.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    /// Time the statistic refers to, when it has one.
    pub time: Option<f64>,
    pub estimate: Estimate,
    pub target: f64,
    pub pass: bool,
}

impl CheckReport {
    fn new(name: &'static str, time: Option<f64>, estimate: Estimate, target: f64) -> Self {
        Self {
            name,
            time,
            estimate,
            target,
            pass: estimate.within(target, SE_MULTIPLE),
        }
    }
}

/// Monte Carlo estimate of `E_P rho(T)`, which must equal one.
pub fn normalization_check<R: Runner>(
    runner: &R,
    model: &Model<'_>,
    rate: f64,
    cfg: &SimulationConfig,
) -> Result<CheckReport> {
    let sim = cfg.with_measure(Measure::Physical);
    sim.validate()?;
    let rows = collect_replicates(runner, sim.replicates, sim.antithetic, |stream, sign| {
        let path = simulate_gap_path_signed(model, &sim, stream, sign)?;
        let w = crate::engine::girsanov_weight(&path, model.drift, model.vol, rate)?;
        Ok(vec![w.value()])
    })?;
    let est = column_estimates(&rows, 1)[0];
    Ok(CheckReport::new("girsanov_normalization", Some(sim.horizon), est, 1.0))
}

/// Discounted price `E_Q[exp(-r t) S(t)]` at `T/4`, `T/2` and `T`, each
/// compared with `S(0)`.
pub fn martingale_check<R: Runner>(
    runner: &R,
    model: &Model<'_>,
    cfg: &SimulationConfig,
    mkt: &MarketConfig,
) -> Result<Vec<CheckReport>> {
    mkt.validate()?;
    let sim = cfg
        .with_horizon(mkt.maturity)
        .with_measure(Measure::RiskNeutral { rate: mkt.rate });
    sim.validate()?;
    let checkpoints = [0.25 * sim.horizon, 0.5 * sim.horizon, sim.horizon];
    let indices = checkpoints
        .iter()
        .map(|&t| require_steps("checkpoint", t, sim.dt))
        .collect::<Result<Vec<_>>>()?;
    let rows = collect_replicates(runner, sim.replicates, sim.antithetic, |stream, sign| {
        let path = simulate_gap_path_signed(model, &sim, stream, sign)?;
        let fwd = path.forward_prices();
        Ok(indices
            .iter()
            .zip(&checkpoints)
            .map(|(&i, &t)| fwd[i] * mkt.discount(t))
            .collect())
    })?;
    let s0 = model.theta.current();
    Ok(column_estimates(&rows, 3)
        .into_iter()
        .zip(checkpoints)
        .map(|(est, t)| CheckReport::new("discounted_martingale", Some(t), est, s0))
        .collect())
}

/// Per-`k` estimates of a statistic that should be bounded uniformly in `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformityReport {
    pub name: &'static str,
    pub k_values: Vec<usize>,
    pub estimates: Vec<Estimate>,
    /// max / min of the estimates.
    pub ratio: f64,
    pub pass: bool,
}

impl UniformityReport {
    fn new(name: &'static str, k_values: &[usize], estimates: Vec<Estimate>) -> Self {
        let max = estimates.iter().map(|e| e.mean).fold(f64::NEG_INFINITY, f64::max);
        let min = estimates.iter().map(|e| e.mean).fold(f64::INFINITY, f64::min);
        let ratio = if max == min { 1.0 } else { max / min };
        Self {
            name,
            k_values: k_values.to_vec(),
            estimates,
            ratio,
            pass: ratio.is_finite() && ratio < UNIFORMITY_RATIO,
        }
    }
}

/// `E sup_{[0,T]} |S^k|^{2 gamma}` for each `k` on coupled paths.
pub fn moment_bound_check<R: Runner>(
    runner: &R,
    k_values: &[usize],
    gamma: u32,
    model: &Model<'_>,
    cfg: &SimulationConfig,
) -> Result<UniformityReport> {
    if !(gamma == 1 || gamma == 2) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: "must be 1 or 2",
        });
    }
    check_k_values(k_values, 1, cfg.dt)?;
    require_bounded(model)?;
    let rows = collect_replicates(runner, cfg.replicates, cfg.antithetic, |stream, sign| {
        let paths = coupled_paths_signed(k_values, model, cfg, stream, sign)?;
        Ok(paths
            .iter()
            .map(|p| {
                let sup = p.forward_prices().iter().copied().fold(0.0, f64::max);
                libm::pow(sup, 2.0 * gamma as f64)
            })
            .collect())
    })?;
    Ok(UniformityReport::new(
        "moment_bound",
        k_values,
        column_estimates(&rows, k_values.len()),
    ))
}

/// Fitted increment constant `C_k = max_h E|S^k(t + h) - S^k(t)|^2 / h` for
/// each `k`, with the mean taken over replicates and all grid times `t`.
pub fn increment_bound_check<R: Runner>(
    runner: &R,
    k_values: &[usize],
    lags: &[f64],
    model: &Model<'_>,
    cfg: &SimulationConfig,
) -> Result<UniformityReport> {
    check_k_values(k_values, 1, cfg.dt)?;
    require_bounded(model)?;
    let lag_steps = lags
        .iter()
        .map(|&h| require_steps("lag", h, cfg.dt))
        .collect::<Result<Vec<_>>>()?;
    if lag_steps.is_empty() || lag_steps.contains(&0) {
        return Err(Error::InvalidParameter {
            name: "lags",
            reason: "need at least one positive lag",
        });
    }
    let columns = k_values.len() * lag_steps.len();
    let rows = collect_replicates(runner, cfg.replicates, cfg.antithetic, |stream, sign| {
        let paths = coupled_paths_signed(k_values, model, cfg, stream, sign)?;
        let mut row = Vec::with_capacity(columns);
        for p in &paths {
            let fwd = p.forward_prices();
            for &s in &lag_steps {
                let pairs = fwd.len().saturating_sub(s).max(1);
                let mean: f64 = fwd
                    .windows(s + 1)
                    .map(|w| (w[s] - w[0]) * (w[s] - w[0]))
                    .sum::<f64>()
                    / pairs as f64;
                row.push(mean / (s as f64 * cfg.dt));
            }
        }
        Ok(row)
    })?;
    let per_column = column_estimates(&rows, columns);
    let estimates = per_column
        .chunks(lag_steps.len())
        .map(|c| {
            *c.iter()
                .max_by(|a, b| a.mean.total_cmp(&b.mean))
                .unwrap_or(&c[0])
        })
        .collect();
    Ok(UniformityReport::new("increment_bound", k_values, estimates))
}
