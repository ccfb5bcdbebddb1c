//! Bayesian and credal model averaging over the full ensemble of logistic
//! regressions built from subsets of a covariate list.

pub mod bma;
pub mod cma_ib;
pub mod cma_nb;
pub mod config;
pub mod dataset;
pub mod decision;
pub mod error;
pub mod experiment;
pub mod logit;
pub mod metrics;
pub mod model_space;
mod poly;
pub mod priors;

pub use error::{Error, ErrorKind, Result};
