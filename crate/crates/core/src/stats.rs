//! Monte Carlo estimators and the replicate runner abstraction.

use alloc::vec::Vec;

use crate::error::Result;

/// Sum by recursive halving. The result depends only on the order of `xs`,
/// and rounding error grows like `log n`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    /// Number of independent samples behind the estimate.
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                samples: 0,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let std_error = if n > 1 {
            let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            libm::sqrt(pairwise_sum(&sq) / (n - 1) as f64 / n as f64)
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            samples: n,
        }
    }

    pub fn ci95(&self) -> (f64, f64) {
        (
            self.mean - 1.96 * self.std_error,
            self.mean + 1.96 * self.std_error,
        )
    }

    /// `|mean - target| <= k * SE`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Standard error of the difference of two independent estimates.
pub fn combined_se(a: &Estimate, b: &Estimate) -> f64 {
    libm::sqrt(a.std_error * a.std_error + b.std_error * b.std_error)
}

/// Executes independent replicate jobs.
///
/// Implementations may run jobs in any order or in parallel but must return
/// results indexed by job number.
pub trait Runner {
    fn map<T, F>(&self, jobs: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Runner for Serial {
    fn map<T, F>(&self, jobs: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..jobs).map(job).collect()
    }
}

/// Runs `replicates` jobs and collects their vector-valued samples.
///
/// `job(stream, sign)` simulates one replicate on Brownian stream `stream`;
/// `sign` is `-1.0` for the antithetic twin. With `antithetic` set, pairs
/// share a stream and each pair contributes the average of its two samples,
/// so the returned rows are independent. The first error by job index wins.
pub fn collect_replicates<R, F>(
    runner: &R,
    replicates: usize,
    antithetic: bool,
    job: F,
) -> Result<Vec<Vec<f64>>>
where
    R: Runner,
    F: Fn(u64, f64) -> Result<Vec<f64>> + Sync + Send,
{
    let rows = if antithetic {
        let pairs = replicates.div_ceil(2);
        runner.map(pairs, |i| {
            let plus = job(i as u64, 1.0)?;
            let minus = job(i as u64, -1.0)?;
            Ok(plus
                .iter()
                .zip(&minus)
                .map(|(a, b)| 0.5 * (a + b))
                .collect())
        })
    } else {
        runner.map(replicates, |i| job(i as u64, 1.0))
    };
    rows.into_iter().collect()
}

/// Per-column estimates of the rows returned by [`collect_replicates`].
pub fn column_estimates(rows: &[Vec<f64>], columns: usize) -> Vec<Estimate> {
    (0..columns)
        .map(|c| {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            Estimate::from_samples(&col)
        })
        .collect()
}
