//! Time grids, history segments and price paths.
//!
//! Everything lives on a uniform grid. Times are `f64` years and two times
//! are considered equal when they differ by less than `1e-12` grid steps.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Relative tolerance for grid arithmetic.
pub const GRID_TOLERANCE: f64 = 1e-12;

/// Number of whole `step`s in `span`, or `None` when `span` is not a
/// multiple of `step` (to [`GRID_TOLERANCE`] relative).
pub fn steps_in(span: f64, step: f64) -> Option<usize> {
    if !(span.is_finite() && step.is_finite() && step > 0.0 && span >= 0.0) {
        return None;
    }
    let ratio = span / step;
    let whole = libm::round(ratio);
    if (ratio - whole).abs() <= GRID_TOLERANCE * whole.max(1.0) {
        Some(whole as usize)
    } else {
        None
    }
}

pub(crate) fn require_steps(what: &'static str, span: f64, step: f64) -> Result<usize> {
    steps_in(span, step).ok_or(Error::NotGridMultiple {
        what,
        value: span,
        step,
    })
}

/// Uniform grid `start + i * step` for `0 <= i <= count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    start: f64,
    step: f64,
    count: usize,
}

impl TimeGrid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if !start.is_finite() {
            return Err(Error::NonFinite("grid start"));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "step",
                reason: "must be positive and finite",
            });
        }
        if count == 0 {
            return Err(Error::InvalidParameter {
                name: "count",
                reason: "a grid needs at least one step",
            });
        }
        Ok(Self { start, step, count })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of steps; the grid has `count + 1` nodes.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn nodes(&self) -> usize {
        self.count + 1
    }

    pub fn end(&self) -> f64 {
        self.node(self.count)
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    fn offset(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFinite("time"));
        }
        let offset = (t - self.start) / self.step;
        let tol = GRID_TOLERANCE * (1.0 + offset.abs());
        if offset < -tol || offset > self.count as f64 + tol {
            return Err(Error::OutOfRange {
                t,
                start: self.start,
                end: self.end(),
            });
        }
        Ok(offset.clamp(0.0, self.count as f64))
    }

    /// Index of the node at `t`; fails when `t` is off-grid or out of range.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let offset = self.offset(t)?;
        let whole = libm::round(offset);
        if (offset - whole).abs() > GRID_TOLERANCE * (1.0 + whole) {
            return Err(Error::OffGrid { t });
        }
        Ok(whole as usize)
    }

    /// Left node index and fractional position in `[0, 1)` of `t`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let offset = self.offset(t)?;
        let whole = libm::round(offset);
        if (offset - whole).abs() <= GRID_TOLERANCE * (1.0 + whole) {
            return Ok((whole as usize, 0.0));
        }
        let left = libm::floor(offset);
        Ok((left as usize, offset - left))
    }
}

/// Price history on `[anchor - window, anchor]`, sampled at the grid step.
///
/// Segments borrow their samples from a path or an initial path, so slicing
/// one out of a simulation never allocates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistorySegment<'a> {
    anchor: f64,
    step: f64,
    values: &'a [f64],
}

impl<'a> HistorySegment<'a> {
    pub fn new(anchor: f64, step: f64, values: &'a [f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "segment",
                reason: "needs at least two samples",
            });
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "step",
                reason: "must be positive and finite",
            });
        }
        Ok(Self {
            anchor,
            step,
            values,
        })
    }

    pub(crate) fn from_parts(anchor: f64, step: f64, values: &'a [f64]) -> Self {
        debug_assert!(values.len() >= 2);
        Self {
            anchor,
            step,
            values,
        }
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn window(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    /// Sample at offset `s` in `[-window, 0]`; `s` must be grid-aligned.
    pub fn at_offset(&self, s: f64) -> Result<f64> {
        let grid = TimeGrid::new(-self.window(), self.step, self.values.len() - 1)?;
        Ok(self.values[grid.index_of(s)?])
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// Largest absolute sample-wise difference to `other`.
    pub fn sup_distance(&self, other: &HistorySegment<'_>) -> Option<f64> {
        if self.values.len() != other.values.len() {
            return None;
        }
        Some(
            self.values
                .iter()
                .zip(other.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Initial price path `theta` on `[-window, 0]`.
///
/// `extension_gap` records how far the path has been extended to the left:
/// on `[-gap - window, -window]` the extended path is frozen at
/// `theta(-window)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPath {
    window: f64,
    step: f64,
    values: Vec<f64>,
    extension_gap: f64,
}

impl InitialPath {
    pub fn new(window: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: "must be positive and finite",
            });
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "step",
                reason: "must be positive and finite",
            });
        }
        let n = require_steps("window", window, step)?;
        if values.len() != n + 1 {
            return Err(Error::InvalidParameter {
                name: "initial path",
                reason: "sample count does not match window / step + 1",
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite("initial path"));
            }
            if value <= 0.0 {
                return Err(Error::NonPositivePath { index, value });
            }
        }
        Ok(Self {
            window,
            step,
            values,
            extension_gap: 0.0,
        })
    }

    pub fn constant(level: f64, window: f64, step: f64) -> Result<Self> {
        let n = require_steps("window", window, step)?;
        Self::new(window, step, alloc::vec![level; n + 1])
    }

    /// Samples `theta(s)` at every grid offset `s` in `[-window, 0]`.
    pub fn from_fn(window: f64, step: f64, theta: impl Fn(f64) -> f64) -> Result<Self> {
        let n = require_steps("window", window, step)?;
        let values = (0..=n)
            .map(|i| theta(-window + i as f64 * step))
            .collect();
        Self::new(window, step, values)
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Samples on `[-window, 0]`, oldest first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extension_gap(&self) -> f64 {
        self.extension_gap
    }

    /// `theta(0)`.
    pub fn current(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Value at `s` in `[-gap - window, 0]` by linear interpolation.
    pub fn value_at(&self, s: f64) -> Result<f64> {
        if s < -self.window {
            let lower = -self.window - self.extension_gap;
            if s < lower - GRID_TOLERANCE * self.step {
                return Err(Error::OutOfRange { t: s, start: lower, end: 0.0 });
            }
            return Ok(self.values[0]);
        }
        let grid = TimeGrid::new(-self.window, self.step, self.values.len() - 1)?;
        let (i, frac) = grid.locate(s)?;
        Ok(interpolate(&self.values, i, frac))
    }

    /// Samples of the extended path on `[-gap - window, 0]`, oldest first.
    pub fn extended_values(&self) -> Vec<f64> {
        let extra = steps_in(self.extension_gap, self.step).unwrap_or(0);
        let mut out = Vec::with_capacity(extra + self.values.len());
        out.resize(extra, self.values[0]);
        out.extend_from_slice(&self.values);
        out
    }

    /// Linear resampling onto a different step. The window must be a
    /// multiple of the new step.
    pub fn resample(&self, step: f64) -> Result<Self> {
        if (step - self.step).abs() <= GRID_TOLERANCE * self.step {
            return Ok(self.clone());
        }
        let path = Self::from_fn(self.window, step, |s| {
            self.value_at(s).unwrap_or(f64::NAN)
        })?;
        Ok(Self {
            extension_gap: self.extension_gap,
            ..path
        })
    }
}

/// Extends `theta` to the left by `gap`, holding `theta(-window)` constant.
///
/// The extension replaces any earlier one; `gap = 0` returns the path as is.
pub fn extend_initial(theta: &InitialPath, gap: f64) -> Result<InitialPath> {
    if !(gap.is_finite() && gap >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "gap",
            reason: "must be non-negative and finite",
        });
    }
    require_steps("gap", gap, theta.step)?;
    if let Some((index, &value)) = theta.values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositivePath { index, value });
    }
    Ok(InitialPath {
        extension_gap: gap,
        ..theta.clone()
    })
}

/// Which probability measure generated a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measure {
    /// The physical measure `P`: the drift functional drives the price.
    Physical,
    /// A risk-neutral measure: the drift is replaced by the short rate.
    RiskNeutral { rate: f64 },
}

impl Measure {
    pub fn tag(&self) -> &'static str {
        match self {
            Measure::Physical => "P",
            Measure::RiskNeutral { .. } => "Q",
        }
    }
}

/// A simulated trajectory on `[-ext - window, T]`.
///
/// Prices before time zero are the extended initial path. Brownian
/// increments, when retained, cover `[0, T]` one per step.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    grid: TimeGrid,
    zero_index: usize,
    gap: f64,
    window: f64,
    prices: Vec<f64>,
    increments: Option<Vec<f64>>,
    measure: Measure,
}

impl PathRecord {
    /// Assembles a path from stored samples. `prices[0]` sits at
    /// `-(zero_index * step)`.
    pub fn from_parts(
        step: f64,
        zero_index: usize,
        gap: f64,
        window: f64,
        prices: Vec<f64>,
        increments: Option<Vec<f64>>,
        measure: Measure,
    ) -> Result<Self> {
        if prices.len() < 2 || zero_index >= prices.len() {
            return Err(Error::InvalidParameter {
                name: "path",
                reason: "needs samples on both sides of time zero or at least two samples",
            });
        }
        let window_steps = require_steps("window", window, step)?;
        if window_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: "must be positive",
            });
        }
        require_steps("gap", gap, step)?;
        if zero_index < window_steps {
            return Err(Error::InvalidParameter {
                name: "path",
                reason: "history before time zero is shorter than the window",
            });
        }
        for (index, &value) in prices.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite("path prices"));
            }
            if value <= 0.0 {
                return Err(Error::NonPositivePath { index, value });
            }
        }
        let steps_after_zero = prices.len() - 1 - zero_index;
        if let Some(dw) = &increments {
            if dw.len() != steps_after_zero {
                return Err(Error::IncrementCount {
                    expected: steps_after_zero,
                    found: dw.len(),
                });
            }
        }
        let start = -(zero_index as f64 * step);
        let grid = TimeGrid::new(start, step, prices.len() - 1)?;
        Ok(Self {
            grid,
            zero_index,
            gap,
            window,
            prices,
            increments,
            measure,
        })
    }

    pub(crate) fn from_simulation(
        step: f64,
        zero_index: usize,
        gap: f64,
        window: f64,
        prices: Vec<f64>,
        increments: Option<Vec<f64>>,
        measure: Measure,
    ) -> Self {
        let start = -(zero_index as f64 * step);
        let grid = TimeGrid {
            start,
            step,
            count: prices.len() - 1,
        };
        Self {
            grid,
            zero_index,
            gap,
            window,
            prices,
            increments,
            measure,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Index of time zero in [`prices`](Self::prices).
    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn step(&self) -> f64 {
        self.grid.step
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Prices on `[0, T]`.
    pub fn forward_prices(&self) -> &[f64] {
        &self.prices[self.zero_index..]
    }

    pub fn increments(&self) -> Option<&[f64]> {
        self.increments.as_deref()
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    /// Last simulated time.
    pub fn horizon(&self) -> f64 {
        (self.prices.len() - 1 - self.zero_index) as f64 * self.grid.step
    }

    pub fn terminal(&self) -> f64 {
        self.prices[self.prices.len() - 1]
    }

    /// Grid index of time `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.grid.index_of(t)
    }

    /// History segment `S_t` on `[t - window, t]`.
    pub fn segment_at(&self, t: f64, window: f64) -> Result<HistorySegment<'_>> {
        let end = self.grid.index_of(t)?;
        let len = require_steps("window", window, self.grid.step)?;
        if len == 0 {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: "must be positive",
            });
        }
        if len > end {
            return Err(Error::OutOfRange {
                t: t - window,
                start: self.grid.start,
                end: self.grid.end(),
            });
        }
        Ok(HistorySegment::from_parts(
            t,
            self.grid.step,
            &self.prices[end - len..=end],
        ))
    }

    /// Price at `t`: the stored sample on nodes, linear interpolation between.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let (i, frac) = self.grid.locate(t)?;
        Ok(interpolate(&self.prices, i, frac))
    }
}

fn interpolate(values: &[f64], i: usize, frac: f64) -> f64 {
    if frac == 0.0 || i + 1 >= values.len() {
        values[i]
    } else {
        values[i] + frac * (values[i + 1] - values[i])
    }
}

/// Segment `S_{t - gap}` read from a buffer of prices, used by the simulator
/// where the path is still being written.
pub(crate) fn delayed_segment(
    prices: &[f64],
    anchor_index: usize,
    window_steps: usize,
    anchor: f64,
    step: f64,
) -> HistorySegment<'_> {
    HistorySegment::from_parts(
        anchor,
        step,
        &prices[anchor_index - window_steps..=anchor_index],
    )
}
