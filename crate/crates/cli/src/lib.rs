//! Benchmark harness for hidegl: configuration files, repeated label-draw
//! evaluation, grid search and report output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;

pub use bench::{
    derive_seed, grid_search, grid_search_raw, load_dataset, run_bench, run_bench_on, BenchReport, CellResult,
    FitCache, GridReport,
};
pub use config::{DatasetSpec, MethodId, Params, RawConfig, RunConfig};
