//! Benchmark harness: synthetic Monte Carlo sweeps over outlier rates,
//! scalability timings, and method comparisons, written as CSV plus a JSON
//! echo of the configuration.

pub mod cli;
pub mod config;
pub mod methods;
pub mod report;
pub mod runner;

pub use config::{ConfigError, Method, RunConfig};
pub use methods::Status;
pub use runner::{run_scalability, run_sweep, summarize, SummaryRow, TrialRow};
