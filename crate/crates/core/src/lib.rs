//! Stock-price models driven by stochastic functional differential equations
//! with finite memory.
//!
//! The drift and volatility of the price at time `t` are functionals of a
//! trailing history segment. In the *memory gap* model the segment ends at
//! `t - l`, so the coefficients over each step are already known and the
//! price can be advanced with an exact exponential step. Letting the gap
//! shrink (`l = 1/k`) approaches the full-memory model.
//!
//! The crate is `no_std` (it needs `alloc`). Monte Carlo drivers are generic
//! over a [`stats::Runner`] so callers can plug in a parallel executor; the
//! results never depend on the schedule.
//!
//! Modules:
//!
//! - [`path`]: time grids, history segments, initial paths, simulated paths
//! - [`functionals`]: drift and volatility functionals with bound metadata
//! - [`rng`]: reproducible per-replicate Brownian streams
//! - [`engine`]: memory-gap and gap-closing simulation, Girsanov weights
//! - [`pricing`]: closed-form, nested and Monte Carlo call prices and hedges
//! - [`diagnostics`]: convergence, normalization, moment and martingale checks

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod functionals;
pub mod path;
pub mod pricing;
pub mod rng;
pub mod stats;

pub use engine::{Model, SimulationConfig};
pub use error::{Error, Result};
pub use functionals::FunctionalSpec;
pub use path::{HistorySegment, InitialPath, Measure, PathRecord, TimeGrid};
pub use pricing::{MarketConfig, OptionKind, PricingMethod, PricingResult};
pub use stats::{Estimate, Runner, Serial};
