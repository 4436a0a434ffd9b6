//! Re-scaled views of the data and the three per-K evaluation pipelines:
//!
//! 1. iMWK-Means, indexes evaluated on the standardized data;
//! 2. iMWK-Means, indexes evaluated on the re-scaled data `Y_w`;
//! 3. K-Means (squared Euclidean, multistart) on `Y_w`, indexes on `Y_w`.

use serde::{Deserialize, Serialize};

use crate::anomalous::{extract_anomalous, imwk_from_init, k_search_cap, AnomalousInit};
use crate::dataset::{ensure_standardized, DataMatrix};
use crate::error::{ClusterError, Result};
use crate::mwk::SolverConfig;
use crate::partition::{check_shapes, euclidean_means, kmeans_multistart_with, Clustering, RestartPolicy};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledView {
    /// `y_iv · w_{k(i),v}`.
    pub data_w: DataMatrix,
    /// `c_kv · w_kv`.
    pub centroids_w: Vec<Vec<f64>>,
    pub source: Clustering,
}

/// Multiplies every entity by the weight row of its cluster, and every
/// centroid by its own weight row.
pub fn rescale_view(data: &DataMatrix, clustering: &Clustering) -> Result<RescaledView> {
    let weights = clustering
        .weights
        .as_ref()
        .ok_or_else(|| ClusterError::InvalidData("clustering carries no feature weights".into()))?;
    let data = ensure_standardized(data)?;
    let data = data.as_ref();
    check_shapes(data, clustering)?;
    let mut values = Vec::with_capacity(data.values().len());
    for (row, &k) in data.rows().zip(&clustering.assignments) {
        values.extend(row.iter().zip(weights.row(k)).map(|(y, w)| y * w));
    }
    let centroids_w = clustering
        .centroids
        .iter()
        .zip(weights.rows())
        .map(|(c, w)| c.iter().zip(w).map(|(c, w)| c * w).collect())
        .collect();
    Ok(RescaledView {
        data_w: DataMatrix::new_standardized(data.n_entities(), data.n_features(), values)?,
        centroids_w,
        source: clustering.clone(),
    })
}

/// One candidate K of a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineEntry {
    pub k: usize,
    pub clustering: Clustering,
    /// Data the validity indexes see; `None` stands for the standardized input.
    pub cvi_data: Option<DataMatrix>,
    /// Centroids matching `cvi_data` (`C_w` in pipeline 2).
    pub cvi_centroids: Vec<Vec<f64>>,
}

impl PipelineEntry {
    pub fn cvi_data<'a>(&'a self, standardized: &'a DataMatrix) -> &'a DataMatrix {
        self.cvi_data.as_ref().unwrap_or(standardized)
    }
}

/// Anomalous patterns and the iMWK-Means clustering for each requested K.
#[derive(Debug, Clone, PartialEq)]
pub struct ImwkPath {
    pub init: AnomalousInit,
    pub clusterings: Vec<Clustering>,
}

/// Runs the anomalous extraction once and iMWK-Means for every K in `ks`.
pub fn imwk_path(data: &DataMatrix, ks: &[usize], cfg: &SolverConfig) -> Result<ImwkPath> {
    let data = ensure_standardized(data)?;
    let init = extract_anomalous(&data, 1, true, cfg)?;
    imwk_path_from(&data, init, ks, cfg)
}

/// As [`imwk_path`] over `[k_min, min(|C_init|, hard_cap)]`.
pub fn imwk_search_path(data: &DataMatrix, k_min: usize, hard_cap: usize, cfg: &SolverConfig) -> Result<ImwkPath> {
    let data = ensure_standardized(data)?;
    let init = extract_anomalous(&data, 1, true, cfg)?;
    let cap = k_search_cap(&init, hard_cap)?;
    let ks: Vec<usize> = (k_min..=cap).collect();
    if ks.is_empty() {
        return Err(ClusterError::InvalidConfig(format!(
            "empty K range [{k_min}, {cap}]"
        )));
    }
    imwk_path_from(&data, init, &ks, cfg)
}

fn imwk_path_from(data: &DataMatrix, init: AnomalousInit, ks: &[usize], cfg: &SolverConfig) -> Result<ImwkPath> {
    let clusterings = ks
        .iter()
        .map(|&k| imwk_from_init(data, &init, k, cfg))
        .collect::<Result<_>>()?;
    Ok(ImwkPath { init, clusterings })
}

/// Pipeline 1 from precomputed iMWK clusterings.
pub fn imwk_entries(path: &ImwkPath) -> Vec<PipelineEntry> {
    path.clusterings
        .iter()
        .map(|c| PipelineEntry {
            k: c.k,
            clustering: c.clone(),
            cvi_data: None,
            cvi_centroids: c.centroids.clone(),
        })
        .collect()
}

/// Pipeline 2 from precomputed iMWK clusterings.
pub fn rescaled_entries(data: &DataMatrix, path: &ImwkPath) -> Result<Vec<PipelineEntry>> {
    path.clusterings
        .iter()
        .map(|c| {
            let view = rescale_view(data, c)?;
            Ok(PipelineEntry {
                k: c.k,
                clustering: view.source,
                cvi_data: Some(view.data_w),
                cvi_centroids: view.centroids_w,
            })
        })
        .collect()
}

/// Pipeline 3 from precomputed iMWK clusterings. Each K gets its own restart
/// stream plus one start from the Euclidean means of the iMWK partition on
/// `Y_w`.
pub fn rescale_kmeans_entries(
    data: &DataMatrix,
    path: &ImwkPath,
    policy: &RestartPolicy,
    cfg: &SolverConfig,
) -> Result<Vec<PipelineEntry>> {
    path.clusterings
        .iter()
        .map(|c| {
            let view = rescale_view(data, c)?;
            let k = c.k;
            let incumbent = euclidean_means(&view.data_w, &c.assignments, k);
            let per_k = RestartPolicy {
                n_restarts: policy.n_restarts,
                rng_seed: derive_seed(policy.rng_seed, &[k as u64]),
            };
            let fit = kmeans_multistart_with(&view.data_w, k, 2.0, &per_k, &cfg.centers, &[incumbent])?;
            Ok(PipelineEntry {
                k,
                cvi_centroids: fit.centroids.clone(),
                clustering: fit,
                cvi_data: Some(view.data_w),
            })
        })
        .collect()
}

pub fn pipeline_imwk(data: &DataMatrix, ks: &[usize], cfg: &SolverConfig) -> Result<Vec<PipelineEntry>> {
    Ok(imwk_entries(&imwk_path(data, ks, cfg)?))
}

pub fn pipeline_imwk_rescaled(data: &DataMatrix, ks: &[usize], cfg: &SolverConfig) -> Result<Vec<PipelineEntry>> {
    let data = ensure_standardized(data)?;
    rescaled_entries(&data, &imwk_path(&data, ks, cfg)?)
}

pub fn pipeline_rescale_kmeans(
    data: &DataMatrix,
    ks: &[usize],
    policy: &RestartPolicy,
    cfg: &SolverConfig,
) -> Result<Vec<PipelineEntry>> {
    let data = ensure_standardized(data)?;
    rescale_kmeans_entries(&data, &imwk_path(&data, ks, cfg)?, policy, cfg)
}
