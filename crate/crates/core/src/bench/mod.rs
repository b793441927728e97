//! Throughput measurement, cost-model fitting and scaling sweeps.

mod fit;
mod metrics;
pub mod reference;
mod scaling;
mod table;

use thiserror::Error;

pub use fit::{
    find_breakeven_shard, fit_cost_model, startup_insignificance_threshold, LinearCostModel,
};
pub use metrics::{
    compute_speedup, compute_throughput, RunContext, SpeedupReport, ThroughputReport,
};
pub use scaling::{
    run_scaling_experiment, run_sequential, run_sequential_sweep, ScalingConfig, ScalingFailure,
    ScalingReport, ScalingRow,
};
pub use table::{
    format_real_time, observations_for, parse_observations, reference_table, scaling_csv,
    scaling_table, throughput_csv, throughput_table, Observation,
};

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("invalid reference throughput {0}")]
    InvalidReference(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("non-physical fit: {0}")]
    NonPhysicalFit(String),
    #[error("threshold undefined for a model with zero marginal cost")]
    UndefinedThreshold,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
