//! Rough fast-mean-reverting stochastic volatility.
//!
//! The volatility is `F(Z^ε_t)` where `Z^ε` is a stationary fractional Ornstein–Uhlenbeck
//! process with Hurst exponent `H < 1/2` and mean-reversion time `ε`. The crate provides the
//! kernel and covariance functions of `Z^ε`, the Gaussian functionals entering the
//! fast-mean-reverting limit (σ̄, D̄), Monte Carlo path simulation, first-order price and
//! implied-volatility approximations, and numerical studies of the limit theorems.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod gaussfunc;
pub mod kernel;
pub mod model;
pub mod pricing;
pub mod quad;
pub mod report;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use gaussfunc::{group_params, GroupParams, VolFunction};
pub use kernel::Hurst;
pub use model::ModelParams;
