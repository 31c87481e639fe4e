//! Optimal per-class weighting of classifier ensembles.
//!
//! The [`optimizer`] selects K classifiers and their classifier-class weights
//! from a validation accuracy matrix; [`baselines`] holds the reference
//! weighting schemes; [`ensemble`] and [`metrics`] score the resulting voters
//! and [`sampling`] manipulates class distributions.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod ensemble;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod optimizer;
pub mod qp;
pub mod sampling;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
