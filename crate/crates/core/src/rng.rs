//! Reproducible Brownian increments.
//!
//! Every replicate owns one ChaCha8 stream selected by `(seed, stream_id)`.
//! ChaCha is counter based, so streams are independent of each other and of
//! the order in which replicates run. Standard normals come from the
//! Box-Muller transform, consuming uniforms in pairs.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::path::TimeGrid;

/// Recorded in output manifests so results can be regenerated.
pub const GENERATOR: &str = "chacha8/rand_chacha-0.9 seed_from_u64+set_stream(replicate); box-muller";

#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on `(0, 1]` with 53 random bits.
    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let radius = libm::sqrt(-2.0 * libm::log(self.uniform()));
        let angle = 2.0 * PI * self.uniform();
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }
}

/// I.i.d. `N(0, dt)` increments, one per step of `grid`.
pub fn brownian_increments(seed: u64, stream: u64, grid: &TimeGrid) -> Vec<f64> {
    increments(seed, stream, grid.step(), grid.count())
}

pub(crate) fn increments(seed: u64, stream: u64, dt: f64, count: usize) -> Vec<f64> {
    let scale = libm::sqrt(dt);
    let mut normals = NormalStream::new(seed, stream);
    (0..count).map(|_| scale * normals.next_standard()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_same_sequence() {
        let grid = TimeGrid::new(0.0, 0.01, 100).unwrap();
        assert_eq!(
            brownian_increments(7, 3, &grid),
            brownian_increments(7, 3, &grid)
        );
        assert_ne!(
            brownian_increments(7, 3, &grid),
            brownian_increments(7, 4, &grid)
        );
        assert_ne!(
            brownian_increments(7, 3, &grid),
            brownian_increments(8, 3, &grid)
        );
    }

    #[test]
    fn increment_moments() {
        let dt = 0.01;
        let n = 1_000_000;
        let grid = TimeGrid::new(0.0, dt, n).unwrap();
        let dw = brownian_increments(42, 0, &grid);
        let mean = dw.iter().sum::<f64>() / n as f64;
        let var = dw.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        // SE of the mean is sqrt(dt/n); SE of the variance is dt*sqrt(2/n)
        assert!(mean.abs() < 3.0 * (dt / n as f64).sqrt(), "mean {mean}");
        assert!(
            (var - dt).abs() < 3.0 * dt * (2.0 / n as f64).sqrt(),
            "variance {var}"
        );
    }

    #[test]
    fn streams_are_uncorrelated() {
        let grid = TimeGrid::new(0.0, 1.0, 200_000).unwrap();
        let a = brownian_increments(1, 0, &grid);
        let b = brownian_increments(1, 1, &grid);
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64;
        assert!(corr.abs() < 3.0 / (a.len() as f64).sqrt());
    }
}
