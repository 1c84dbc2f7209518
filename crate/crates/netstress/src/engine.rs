//! Parallel trial execution with order-preserving collection.
//!
//! Workers only ever compute values for explicit indices; every reduction
//! happens afterwards on the index-ordered vector, so results do not depend
//! on the number of threads.

use rayon::prelude::*;

use netstress_core::simulate::{self, observe_trial, stochvol_delta_trial};
use netstress_core::{Matrix, ModelParams, MonteCarloEstimate, Observable, SimConfig};

use crate::error::{AppError, Result};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "NETSTRESS_THREADS";

/// Thread pool running Monte Carlo trials.
pub struct Engine {
    pool: rayon::ThreadPool,
}

impl Engine {
    /// Pool with `threads` workers, or one per available core when `None`.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        if threads == Some(0) {
            return Err(AppError::Usage("--threads must be at least 1".into()));
        }
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| AppError::Usage(format!("cannot start {threads:?} worker threads: {e}")))?;
        Ok(Self { pool })
    }

    /// Number of worker threads.
    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `f(0), …, f(n-1)` evaluated in parallel, returned in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }

    /// Parallel counterpart of [`simulate::estimate_observable`]; returns the
    /// identical estimate.
    pub fn estimate(
        &self,
        params: &ModelParams,
        m: &Matrix,
        cfg: &SimConfig,
        observable: Observable,
    ) -> netstress_core::Result<MonteCarloEstimate> {
        params.validate()?;
        cfg.validate(params)?;
        params.require_matrix(m)?;
        let values = self.map(cfg.n_trials, |trial| {
            observe_trial(params, m, cfg, observable, trial as u64)
        });
        simulate::aggregate(&values, cfg.antithetic)
    }

    /// Parallel counterpart of [`simulate::paired_stochvol_delta`].
    pub fn paired_stochvol_delta(
        &self,
        params: &ModelParams,
        m: &Matrix,
        cfg: &SimConfig,
    ) -> netstress_core::Result<MonteCarloEstimate> {
        params.validate()?;
        cfg.validate(params)?;
        params.require_matrix(m)?;
        let values = self.map(cfg.n_trials, |trial| {
            stochvol_delta_trial(params, m, cfg, trial as u64)
        });
        simulate::aggregate(&values, cfg.antithetic)
    }
}
