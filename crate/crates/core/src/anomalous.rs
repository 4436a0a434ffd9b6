//! Anomalous-pattern initialisation (iK-Means and its weighted Minkowski
//! analogue) and intelligent MWK-Means built on top of it.
//!
//! Patterns are peeled off one at a time: a reference centre stays pinned
//! while a second centroid, seeded at the entity farthest from it, is
//! iterated; its cluster is then removed from the pool. Unweighted
//! extraction pins the centre of the whole data set, the weighted variant
//! the Minkowski centre of the entities not yet extracted.

use serde::{Deserialize, Serialize};

use crate::dataset::{ensure_standardized, DataMatrix};
use crate::error::{ClusterError, Result};
use crate::metric::{validate_exponent, WeightMatrix};
use crate::mwk::{mwk_means, SolverConfig};
use crate::partition::{active_distance, alternate, update_centroids, AlternateOptions, Clustering};

/// Upper end of the K search range used throughout the experiments.
pub const DEFAULT_K_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalousInit {
    /// Final centroids of the accepted anomalous clusters, in extraction order.
    pub centroids: Vec<Vec<f64>>,
    /// Matching weight rows (uniform when extraction was unweighted).
    pub weights: Vec<Vec<f64>>,
    /// Cardinalities of the accepted clusters.
    pub cluster_sizes: Vec<usize>,
    /// Cardinalities of every extracted cluster, accepted or not.
    #[serde(default)]
    pub extracted_sizes: Vec<usize>,
}

impl AnomalousInit {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }
}

/// Extracts anomalous clusters until no entity remains. Clusters smaller
/// than `theta` are removed from the pool but not recorded.
pub fn extract_anomalous(
    data: &DataMatrix,
    theta: usize,
    weighted: bool,
    cfg: &SolverConfig,
) -> Result<AnomalousInit> {
    let p = cfg.p();
    if weighted {
        cfg.validate_weighted()?;
    } else {
        validate_exponent(p)?;
        cfg.centers.validate()?;
    }
    let data = ensure_standardized(data)?;
    let data = data.as_ref();
    let v = data.n_features();
    let uniform_row = vec![1.0 / v as f64; v];
    let uniform_p: Vec<f64> = uniform_row.iter().map(|w| w.powf(p)).collect();

    let mut remaining: Vec<usize> = (0..data.n_entities()).collect();
    let mut out = AnomalousInit {
        centroids: Vec::new(),
        weights: Vec::new(),
        cluster_sizes: Vec::new(),
        extracted_sizes: Vec::new(),
    };
    let opts = AlternateOptions {
        p,
        centers: &cfg.centers,
        weighting: weighted.then_some(cfg.minkowski.dispersion_offset_enabled),
        frozen: Some(1),
        guard_nonempty: Some(0),
        reseed_empty: false,
    };

    let centre_of = |rows: &[usize]| -> Result<Vec<f64>> {
        let mut centre = vec![vec![0.0; v]];
        update_centroids(data, rows, &vec![0; rows.len()], p, &cfg.centers, &mut centre, None)?;
        Ok(centre.pop().expect("one centre"))
    };
    // Unweighted extraction keeps the centre of the full data set as the
    // reference point; the weighted variant re-centres on what remains.
    let fixed_reference = if weighted { None } else { Some(centre_of(&remaining)?) };

    while !remaining.is_empty() {
        let grand = match &fixed_reference {
            Some(c) => c.clone(),
            None => centre_of(&remaining)?,
        };

        let wp = weighted.then_some(uniform_p.as_slice());
        let mut farthest = remaining[0];
        let mut best = f64::NEG_INFINITY;
        for &i in &remaining {
            let d = active_distance(data.row(i), &grand, wp, p);
            if d > best {
                best = d;
                farthest = i;
            }
        }

        let weights = weighted.then(|| WeightMatrix::uniform(2, v));
        let state = alternate(
            data,
            &remaining,
            vec![data.row(farthest).to_vec(), grand],
            weights,
            &opts,
        )?;

        let mut kept = Vec::with_capacity(remaining.len());
        let mut size = 0;
        for (&i, &a) in remaining.iter().zip(&state.assignments) {
            if a == 0 {
                size += 1;
            } else {
                kept.push(i);
            }
        }
        debug_assert!(size > 0, "anomalous cluster cannot be empty");
        out.extracted_sizes.push(size);
        if size >= theta {
            out.centroids.push(state.centroids[0].clone());
            out.weights.push(match &state.weights {
                Some(w) => w.row(0).to_vec(),
                None => uniform_row.clone(),
            });
            out.cluster_sizes.push(size);
        }
        remaining = kept;
    }
    Ok(out)
}

/// Upper end of the K search range: `min(|C_init|, hard_cap)`.
pub fn k_search_cap(init: &AnomalousInit, hard_cap: usize) -> Result<usize> {
    if hard_cap < 2 {
        return Err(ClusterError::InvalidConfig(format!(
            "K cap must be >= 2, got {hard_cap}"
        )));
    }
    if init.len() < 2 {
        return Err(ClusterError::TooFewAnomalousClusters {
            found: init.len(),
            needed: 2,
        });
    }
    Ok(init.len().min(hard_cap))
}

/// Keeps the `k` largest anomalous clusters, largest first; equal sizes keep
/// extraction order.
pub fn truncate_to_k(init: &AnomalousInit, k: usize) -> Result<AnomalousInit> {
    if k > init.len() {
        return Err(ClusterError::TooFewAnomalousClusters {
            found: init.len(),
            needed: k,
        });
    }
    let mut order: Vec<usize> = (0..init.len()).collect();
    order.sort_by(|&a, &b| init.cluster_sizes[b].cmp(&init.cluster_sizes[a]));
    order.truncate(k);
    Ok(AnomalousInit {
        centroids: order.iter().map(|&i| init.centroids[i].clone()).collect(),
        weights: order.iter().map(|&i| init.weights[i].clone()).collect(),
        cluster_sizes: order.iter().map(|&i| init.cluster_sizes[i]).collect(),
        extracted_sizes: init.extracted_sizes.clone(),
    })
}

/// MWK-Means started from the `k` largest anomalous patterns of `init`.
pub fn imwk_from_init(
    data: &DataMatrix,
    init: &AnomalousInit,
    k: usize,
    cfg: &SolverConfig,
) -> Result<Clustering> {
    let top = truncate_to_k(init, k)?;
    let weights = WeightMatrix::from_rows(&top.weights)?;
    mwk_means(data, k, &top.centroids, &weights, cfg)
}

/// Intelligent MWK-Means: weighted extraction with `θ = 1`, truncation to
/// `k` patterns, then MWK-Means. Deterministic.
pub fn imwk_means(data: &DataMatrix, k: usize, cfg: &SolverConfig) -> Result<Clustering> {
    let data = ensure_standardized(data)?;
    let init = extract_anomalous(&data, 1, true, cfg)?;
    imwk_from_init(&data, &init, k, cfg)
}
