//! Replicate execution: sequential, or on a rayon pool when the `parallel`
//! feature is on. Results always come back in replicate order.

use crate::error::Result;
#[cfg(feature = "parallel")]
use crate::error::Error;

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "SOJOURN_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel {
        /// `None` uses every available core.
        workers: Option<usize>,
    },
}

impl Execution {
    /// Worker count from the config, capped by `SOJOURN_WORKERS`. One worker
    /// means sequential.
    pub fn resolve(requested: Option<usize>) -> Execution {
        let cap = std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&w| w > 0);
        let workers = match (requested.filter(|&w| w > 0), cap) {
            (Some(r), Some(c)) => Some(r.min(c)),
            (r, c) => r.or(c),
        };
        Self::with_workers(workers)
    }

    #[cfg(feature = "parallel")]
    pub fn with_workers(workers: Option<usize>) -> Execution {
        match workers {
            Some(1) => Execution::Sequential,
            w => Execution::Parallel { workers: w },
        }
    }

    #[cfg(not(feature = "parallel"))]
    pub fn with_workers(_workers: Option<usize>) -> Execution {
        Execution::Sequential
    }

    /// `f(0), f(1), ..., f(count - 1)` in index order.
    pub fn map<T, F>(&self, count: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match *self {
            Execution::Sequential => Ok((0..count).map(f).collect()),
            #[cfg(feature = "parallel")]
            Execution::Parallel { workers } => {
                use rayon::prelude::*;
                let mut builder = rayon::ThreadPoolBuilder::new();
                if let Some(w) = workers {
                    builder = builder.num_threads(w);
                }
                let pool = builder.build().map_err(|e| Error::ThreadPool(e.to_string()))?;
                Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
            }
        }
    }
}
