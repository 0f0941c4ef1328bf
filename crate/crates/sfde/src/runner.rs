use rayon::prelude::*;
use sfde_core::Runner;

/// Runs replicate jobs on the rayon pool. Output order follows the job
/// index, so estimates do not depend on the schedule.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl Runner for Parallel {
    fn map<T, F>(&self, jobs: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..jobs).into_par_iter().map(job).collect()
    }
}
