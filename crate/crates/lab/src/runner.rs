//! Trial-parallel execution with results returned in trial order.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{LabError, LabResult};

pub struct Runner {
    pool: ThreadPool,
    workers: usize,
}

impl Runner {
    /// `workers == 0` uses the available parallelism.
    pub fn new(workers: usize) -> LabResult<Self> {
        let workers = if workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            workers
        };
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| LabError::config(format!("cannot start {workers} workers: {e}")))?;
        Ok(Runner { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// `f(0), …, f(trials − 1)` in order. On failure the error of the
    /// lowest failing trial is returned, whatever the scheduling.
    pub fn trials<T, F>(&self, trials: u64, f: F) -> LabResult<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> opuc_core::Result<T> + Sync,
    {
        let out: Vec<opuc_core::Result<T>> = self.pool.install(|| (0..trials).into_par_iter().map(&f).collect());
        out.into_iter().collect::<Result<Vec<_>, _>>().map_err(LabError::from)
    }
}
