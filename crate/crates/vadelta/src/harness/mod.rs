//! Experiment harness: configuration, the method-comparison protocol,
//! sensitivity sweeps, and report emission.
//!
//! Every random draw is seeded from the experiment's master seed through
//! a stage label (see [`crate::seeds`]), so an entire comparison rerun
//! with the same configuration reproduces every number exactly; only
//! wall-clock timings differ, and those are quarantined into dedicated
//! files by the report writer.

mod compare;
mod config;
mod report;
mod sensitivity;

pub use compare::{
    draw_representatives, fixed_portfolios, ground_truth, run_comparison, run_comparison_into,
    summarize, ComparisonReport, FixedPortfolios, MethodOutcome, MethodSummary,
    ReplicationHistory, ScatterPoint,
};
pub use config::{
    ExperimentConfig, MethodSpec, PortfolioSizes, Spaces, OUTPUT_DIR_ENV,
};
pub use report::{
    emit_reports, run_comparison_to_dir, run_sensitivity_to_dir, RawResults, RunArtifacts,
};
pub use sensitivity::{
    run_sensitivity, SensitivityReport, SensitivityRow, SensitivitySummary, SensitivityVariable,
    SIZE_SWEEP_TRIPLES,
};
