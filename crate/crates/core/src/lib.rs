//! Core of the interbank network stress model.
//!
//! Banks carry a state `x_i` driven by independent Brownian noise and by the
//! recent variations `h_j` of their counterparties, propagated through an
//! interaction matrix:
//!
//! ```text
//! dx_i = σ dW_i + γ Σ_j M_ij h_j dt
//! dh_i = -β h_i dt + √β dx_i
//! ```
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure numerics:
//!
//! * [`linalg`]: dense matrices, matrix exponential, eigenvalue summaries.
//! * [`model`]: parameters, interaction-matrix ensembles, drift matrix.
//! * [`simulate`]: Euler–Maruyama paths, observables and a sequential
//!   Monte Carlo estimator built on per-trial counter-based noise streams.
//! * [`analytic`]: closed-form short-time expansions and a quadrature oracle
//!   for the exact correlation integrals.
//!
//! Parallel execution, file formats and the command line live in the
//! `netstress` crate.
#![no_std]
#![warn(missing_docs)]

extern crate alloc;

pub mod analytic;
mod error;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{EigenSummary, Matrix};
pub use model::{CapitalConstraint, ConstraintKind, ModelParams, NonlinearSpec};
pub use simulate::{MonteCarloEstimate, Observable, SimConfig, StateVector};
