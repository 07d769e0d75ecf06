use mml_core::sim::{Block, Executor};
use rayon::prelude::*;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "MML_WORKERS";

/// Runs blocks on a dedicated rayon pool; results come back in block order.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(workers: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .expect("failed to start worker pool");
        Self { pool }
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Default for Parallel {
    fn default() -> Self {
        Self::new(default_workers())
    }
}

impl Executor for Parallel {
    fn map_blocks<T, F>(&self, blocks: &[Block], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Block) -> T + Sync + Send,
    {
        self.pool.install(|| blocks.par_iter().map(|&b| f(b)).collect())
    }
}

/// `MML_WORKERS` if set to a positive integer, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w: &usize| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
