//! Command line application around `netstress-core`: parallel Monte Carlo,
//! figure sweeps, matrix files and versioned CSV/JSON outputs.
//!
//! Results are bitwise independent of the worker count: trials draw from
//! per-index noise streams and are reduced in index order.

pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod matrix_io;
pub mod output;
pub mod run;

pub use config::{Command, MatrixSource, RunConfig};
pub use engine::Engine;
pub use error::{AppError, Result};
pub use experiments::SweepResult;
