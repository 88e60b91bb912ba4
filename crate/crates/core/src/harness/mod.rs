//! Run configuration, file formats, benchmarking and the command-line front end.

pub mod benchmark;
pub mod check;
pub mod cli;
pub mod config;
pub mod io;

pub use benchmark::{
    aggregate, format_plot_csv, run_benchmark, run_replicate, trajectory_path, write_benchmark,
    write_trajectory, BenchmarkSummary, MethodSummary, ReplicateResult,
};
pub use check::{
    check_likelihood, read_check_input, CheckReport, CheckResult, CheckRow, CheckSummary,
};
pub use config::{InitialPoolSpec, ModelSpec, OracleSpec, RunConfig};
