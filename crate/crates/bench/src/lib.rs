//! Benchmark harness: runs the estimators over a dataset, pairs estimates
//! with the ground truth and reduces the errors into per-SNR report rows.

pub mod config;
pub mod evaluate;
pub mod experiment;
pub mod plot;
pub mod report;

pub use evaluate::{evaluate_run, run_method, EvalConfig};
pub use report::{BenchReport, BenchRow, SnrBins};
