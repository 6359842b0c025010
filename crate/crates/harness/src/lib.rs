//! Experiment harness for the truncated-sum estimators in `ptss-core`:
//! configurable sweeps, replicate aggregation and deterministic CSV output.

pub mod config;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod output;
pub mod stats;

pub use config::{ExperimentConfig, ExperimentKind, Variant};
pub use error::{HarnessError, Result};
pub use experiments::{endpoint_distance, run_experiment};
pub use output::{ExperimentOutput, OracleRow, Rows, SweepRow, TrajectoryRow};
