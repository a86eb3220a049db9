//! Bayesian inference engine for spatiotemporal areal data with censored and
//! missing responses: SAR/DAGAR spatial and AR(p) temporal correlation in
//! innovation form, a collapsed Gibbs/Metropolis sampler, posterior
//! prediction, model criteria, and a simulation-study harness.

pub mod correlation;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod inference;
pub mod data;
pub mod prediction;
pub mod stats;
pub mod stochastics;
pub mod study;

pub use error::{Error, ErrorClass, Result};
