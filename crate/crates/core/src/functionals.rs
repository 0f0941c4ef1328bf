//! Drift and volatility functionals of a price history segment.
//!
//! A functional maps `(t, eta)` to a rate, where `eta` is the price history
//! on `[-L, 0]`. All kinds here are time-homogeneous. Segment integrals use
//! the trapezoidal rule on the grid samples.

use alloc::boxed::Box;

use crate::error::{Error, Result};
use crate::path::{HistorySegment, GRID_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalKind {
    /// Returns `c` on every segment.
    Constant(f64),
    /// `(1/L) * integral of eta over [-L, 0]`.
    MovingAverage { window: f64 },
    /// Root-mean-square deviation of `eta` around its moving average,
    /// clamped into `[floor, cap]`.
    RealizedVol { window: f64, floor: f64, cap: f64 },
    /// `scale * inner + shift`.
    Affine {
        inner: Box<FunctionalSpec>,
        scale: f64,
        shift: f64,
    },
}

/// A functional together with its declared bounds and Lipschitz constant.
///
/// Bounds default to what the kind guarantees (a realized-vol clamp, a
/// constant's value); a moving average has no intrinsic bound, so callers
/// that need one declare it with [`with_bounds`](Self::with_bounds) and can
/// check it with [`validate_bounds`]. The default Lipschitz constants are
/// with respect to the sup norm on segments.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSpec {
    kind: FunctionalKind,
    bounds: Option<(f64, f64)>,
    lipschitz: Option<f64>,
}

fn positive_window(window: f64) -> Result<()> {
    if window.is_finite() && window > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "window",
            reason: "must be positive and finite",
        })
    }
}

impl FunctionalSpec {
    pub fn constant(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite("constant functional"));
        }
        Ok(Self {
            kind: FunctionalKind::Constant(value),
            bounds: Some((value, value)),
            lipschitz: Some(0.0),
        })
    }

    pub fn moving_average(window: f64) -> Result<Self> {
        positive_window(window)?;
        Ok(Self {
            kind: FunctionalKind::MovingAverage { window },
            bounds: None,
            lipschitz: Some(1.0),
        })
    }

    pub fn realized_vol(window: f64, floor: f64, cap: f64) -> Result<Self> {
        positive_window(window)?;
        if !(floor.is_finite() && cap.is_finite() && floor > 0.0 && floor < cap) {
            return Err(Error::InvalidParameter {
                name: "realized_vol",
                reason: "requires 0 < floor < cap",
            });
        }
        Ok(Self {
            kind: FunctionalKind::RealizedVol { window, floor, cap },
            bounds: Some((floor, cap)),
            lipschitz: Some(1.0),
        })
    }

    pub fn affine(inner: FunctionalSpec, scale: f64, shift: f64) -> Result<Self> {
        if !(scale.is_finite() && shift.is_finite()) {
            return Err(Error::NonFinite("affine functional"));
        }
        let bounds = inner.bounds.map(|(lo, hi)| {
            let (a, b) = (scale * lo + shift, scale * hi + shift);
            (a.min(b), a.max(b))
        });
        let lipschitz = inner.lipschitz.map(|a| a * scale.abs());
        Ok(Self {
            kind: FunctionalKind::Affine {
                inner: Box::new(inner),
                scale,
                shift,
            },
            bounds,
            lipschitz,
        })
    }

    /// Declares `lower <= value <= upper` on the segments this functional will
    /// see. The declaration is metadata; [`validate_bounds`] checks it.
    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
            return Err(Error::InvalidParameter {
                name: "bounds",
                reason: "requires finite lower <= upper",
            });
        }
        self.bounds = Some((lower, upper));
        Ok(self)
    }

    pub fn with_lipschitz(mut self, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lipschitz",
                reason: "must be non-negative and finite",
            });
        }
        self.lipschitz = Some(alpha);
        Ok(self)
    }

    pub fn kind(&self) -> &FunctionalKind {
        &self.kind
    }

    /// Declared `(lower, upper)` bounds, if any.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    /// Declared `max |value|`.
    pub fn max_abs(&self) -> Option<f64> {
        self.bounds.map(|(lo, hi)| lo.abs().max(hi.abs()))
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    /// History window the functional reads, `None` when it ignores history.
    pub fn window(&self) -> Option<f64> {
        match &self.kind {
            FunctionalKind::Constant(_) => None,
            FunctionalKind::MovingAverage { window } => Some(*window),
            FunctionalKind::RealizedVol { window, .. } => Some(*window),
            FunctionalKind::Affine { inner, .. } => inner.window(),
        }
    }

    /// True when the value does not depend on the segment.
    pub fn is_history_free(&self) -> bool {
        self.window().is_none()
    }

    /// Checks that this functional can serve as a volatility: its declared
    /// lower bound must be strictly positive.
    pub fn require_positive_vol(&self) -> Result<()> {
        match self.bounds {
            Some((lo, _)) if lo > 0.0 => Ok(()),
            _ => Err(Error::InvalidParameter {
                name: "volatility functional",
                reason: "needs a strictly positive declared lower bound",
            }),
        }
    }

    /// Value at time `t` on a history segment. The built-in kinds do not
    /// depend on `t`; the argument keeps the call shape of a general
    /// functional.
    pub fn eval(&self, _t: f64, seg: &HistorySegment<'_>) -> Result<f64> {
        if let Some(window) = self.window() {
            let found = seg.window();
            if (found - window).abs() > GRID_TOLERANCE * window.max(1.0) * 4.0 {
                return Err(Error::WindowMismatch {
                    expected: window,
                    found,
                });
            }
            if seg.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("history segment"));
            }
        }
        Ok(self.eval_unchecked(seg.values()))
    }

    /// Evaluation without the window and finiteness checks. The simulator
    /// validates both once before stepping.
    pub(crate) fn eval_unchecked(&self, values: &[f64]) -> f64 {
        match &self.kind {
            FunctionalKind::Constant(c) => *c,
            FunctionalKind::MovingAverage { .. } => trapezoid_mean(values),
            FunctionalKind::RealizedVol { floor, cap, .. } => {
                rms_deviation(values).clamp(*floor, *cap)
            }
            FunctionalKind::Affine {
                inner,
                scale,
                shift,
            } => scale * inner.eval_unchecked(values) + shift,
        }
    }

    /// Realized-vol value before the clamp is applied; other kinds evaluate
    /// as usual.
    pub fn eval_unclamped(&self, t: f64, seg: &HistorySegment<'_>) -> Result<f64> {
        match &self.kind {
            FunctionalKind::RealizedVol { .. } => {
                self.eval(t, seg)?;
                Ok(rms_deviation(seg.values()))
            }
            FunctionalKind::Affine {
                inner,
                scale,
                shift,
            } => Ok(scale * inner.eval_unclamped(t, seg)? + shift),
            _ => self.eval(t, seg),
        }
    }
}

/// Trapezoidal mean of equally spaced samples.
fn trapezoid_mean(values: &[f64]) -> f64 {
    let n = values.len() - 1;
    let inner: f64 = values[1..n].iter().sum();
    (inner + 0.5 * (values[0] + values[n])) / n as f64
}

fn rms_deviation(values: &[f64]) -> f64 {
    let mean = trapezoid_mean(values);
    let n = values.len() - 1;
    let sq = |v: f64| (v - mean) * (v - mean);
    let inner: f64 = values[1..n].iter().map(|&v| sq(v)).sum();
    let variance = (inner + 0.5 * (sq(values[0]) + sq(values[n]))) / n as f64;
    libm::sqrt(variance.max(0.0))
}

/// Drift `f(t, eta)`.
pub fn eval_drift(spec: &FunctionalSpec, t: f64, seg: &HistorySegment<'_>) -> Result<f64> {
    spec.eval(t, seg)
}

/// Volatility `g(t, eta)`.
pub fn eval_vol(spec: &FunctionalSpec, t: f64, seg: &HistorySegment<'_>) -> Result<f64> {
    spec.eval(t, seg)
}

/// Empirical behaviour of a functional over a set of probe segments.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub probes: usize,
    pub min: f64,
    pub max: f64,
    pub max_abs: f64,
    /// Largest `|F(a) - F(b)| / sup|a - b|` over probe pairs of equal length.
    pub lipschitz_ratio: Option<f64>,
    pub bound_violation: bool,
    pub lipschitz_violation: bool,
}

impl BoundsReport {
    pub fn ok(&self) -> bool {
        !(self.bound_violation || self.lipschitz_violation)
    }
}

/// Relative slack allowed when comparing empirical values with declarations.
pub const BOUNDS_TOLERANCE: f64 = 1e-9;

/// Evaluates `spec` on every probe and compares the empirical range and
/// Lipschitz ratio with the declared metadata.
pub fn validate_bounds(
    spec: &FunctionalSpec,
    probes: &[HistorySegment<'_>],
) -> Result<BoundsReport> {
    if probes.is_empty() {
        return Err(Error::InvalidParameter {
            name: "probes",
            reason: "need at least one segment",
        });
    }
    let mut values = alloc::vec::Vec::with_capacity(probes.len());
    for seg in probes {
        values.push(spec.eval(seg.anchor(), seg)?);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_abs = min.abs().max(max.abs());

    let mut ratio: Option<f64> = None;
    for i in 0..probes.len() {
        for j in i + 1..probes.len() {
            if let Some(d) = probes[i].sup_distance(&probes[j]) {
                if d > 0.0 {
                    let r = (values[i] - values[j]).abs() / d;
                    ratio = Some(ratio.map_or(r, |m| m.max(r)));
                }
            }
        }
    }

    let bound_violation = spec.bounds.is_some_and(|(lo, hi)| {
        let slack = BOUNDS_TOLERANCE * (1.0 + lo.abs().max(hi.abs()));
        min < lo - slack || max > hi + slack
    });
    let lipschitz_violation = match (spec.lipschitz, ratio) {
        (Some(alpha), Some(r)) => r > alpha * (1.0 + BOUNDS_TOLERANCE) + BOUNDS_TOLERANCE,
        _ => false,
    };
    Ok(BoundsReport {
        probes: probes.len(),
        min,
        max,
        max_abs,
        lipschitz_ratio: ratio,
        bound_violation,
        lipschitz_violation,
    })
}
