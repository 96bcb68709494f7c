//! Instrumental-variable estimation of the causal difference in cumulative
//! incidence, `F¹(t) − F⁰(t)`, from right-censored survival data.
//!
//! The pieces, in the order a typical analysis uses them:
//!
//! - [`dataset`]: cohort records, CSV I/O, provider-preference instruments.
//! - [`nuisance`]: Cox and logistic working models, cross-fitting.
//! - [`estimator`]: plug-in, one-step and G-formula estimates with Wald intervals.
//! - [`simulate`]: the simulation designs and Monte Carlo summaries.
//! - [`cli`]: the `ivsurv` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod nuisance;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
