//! Simulation toolkit for quantum ensembles of classifiers.
//!
//! - [`statevector`]: dense simulator with gates, bit-flip oracles, amplitude
//!   encoding, marginals and postselection.
//! - [`deutsch_jozsa`]: the Deutsch-Jozsa protocol and its embedding as a
//!   uniform-weight ensemble.
//! - [`qensemble`]: weighted and accuracy-weighted ensembles of discretized
//!   classifiers, with exact classical sums to check them against.
//! - [`dequantize`]: rejection sampling that reproduces the accuracy-weighted
//!   ensemble classically.
//! - [`models`]: base models, synthetic data and accuracies.
//! - [`experiments`]: accuracy concentration studies and CSV export.
//! - [`cli`]: the `qens` command line.

pub mod cli;
pub mod dequantize;
pub mod deutsch_jozsa;
pub mod error;
pub mod experiments;
pub mod models;
pub mod qensemble;
pub mod rng;
pub mod statevector;

pub use error::{Error, Result};
