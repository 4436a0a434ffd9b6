//! Scoring of estimated partitions and the experiment harness.

pub mod harness;
pub mod metrics;

pub use harness::{
    aggregate, default_p_grid, estimate_k, run_experiment, write_outputs, AggregateRow, ExperimentConfig, ExperimentOutput,
    ExperimentRecord, KEstimate, Method, SearchSettings,
};
pub use metrics::{adjusted_rand, mean_se, relative_error, MeanSe};
