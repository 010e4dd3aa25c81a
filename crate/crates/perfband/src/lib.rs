//! Performance prediction for configurable software systems with calibrated
//! confidence intervals.
//!
//! The pipeline: ingest measurement CSVs, drop constant/collinear option
//! columns, normalize performance to [0, 100], train a K-member ensemble of
//! mean-field variational Bayesian neural networks with a sparsity-inducing
//! Laplace prior on the first layer and a heteroscedastic noise head, then
//! calibrate each member's confidence intervals on held-out folds by
//! searching per-level interval scaling factors. Hyperparameters are tuned
//! by Bayesian optimization with incremental layer growth.

pub mod baseline;
pub mod bnn;
pub mod calibration;
pub mod cli;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod hpo;
mod linalg;
pub mod metrics;
pub mod net;
pub mod seeds;
pub mod stats;

pub use error::{Error, Result};
