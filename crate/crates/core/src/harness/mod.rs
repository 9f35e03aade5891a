//! Comparison metrics and experiment orchestration.

pub mod experiment;
pub mod metrics;

pub use experiment::{compute_experiment, run_experiment, ConvergenceRow, ExperimentOutcome, ExperimentSpec};
pub use metrics::{compare, fit_line, fit_log_linear, rqe, ComparisonReport, LinearFit, SummaryStats};
