//! Graph-based semi-supervised classification on learned high-density points.
//!
//! The pipeline learns `k ≪ n` high-density points connected by a spanning
//! tree ([`hdp`]), builds an implicit sample graph `W = ZMZᵀ` from the soft
//! assignments ([`graph`]), and propagates a handful of labels over it
//! ([`infer`]). [`baselines`] holds the reference LGC and AGR methods.

// `!(v > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod graph;
pub mod hdp;
pub mod infer;
pub mod kmeans;
pub mod linalg;

pub use error::{Error, Result};
