//! Minkowski weighted K-Means with anomalous-pattern initialisation, feature
//! re-scaling pipelines, cluster validity indexes and a synthetic benchmark
//! harness.

pub mod anomalous;
pub mod centers;
pub mod dataset;
pub mod datagen;
pub mod error;
pub mod evaluate;
pub mod metric;
pub mod mwk;
pub mod partition;
mod pruned;
pub mod rescale;
pub mod seed;
pub mod validity;

pub use anomalous::{extract_anomalous, imwk_means, k_search_cap, truncate_to_k, AnomalousInit};
pub use centers::{minkowski_center, CenterMethod, CenterSolverConfig};
pub use dataset::{standardize_range, DataMatrix, LabeledData};
pub use error::{ClusterError, ErrorClass, Result};
pub use metric::{minkowski_p, weighted_minkowski_p, MinkowskiConfig, WeightMatrix, P_NEAR_ONE};
pub use mwk::{mwk_means, mwk_multistart, update_weights, DispersionTable, SolverConfig};
pub use partition::{kmeans, kmeans_multistart, Clustering, RestartPolicy};
pub use validity::{CviIndex, KSelectionReport, SelectionRule};
pub use rescale::{rescale_view, PipelineEntry, RescaledView};
pub use datagen::{generate, Family, NoiseFamily, ScenarioSpec};
pub use evaluate::{adjusted_rand, relative_error, run_experiment, ExperimentConfig, ExperimentRecord, Method};
