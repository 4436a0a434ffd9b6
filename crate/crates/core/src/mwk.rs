//! Minkowski weighted K-Means: assignments, Minkowski centroids and
//! cluster-specific feature weights are minimised in turn.
//!
//! Weights follow `w_kv ∝ D_kv^{-1/(p-1)}` where `D_kv` is the within-cluster
//! dispersion of feature `v`. Every dispersion is shifted by the mean raw
//! dispersion of the current round unless the offset is disabled.

use serde::{Deserialize, Serialize};

use crate::centers::CenterSolverConfig;
use crate::dataset::{ensure_standardized, DataMatrix};
use crate::error::{ClusterError, Result};
use crate::metric::{pow_abs, validate_exponent, MinkowskiConfig, WeightMatrix, WEIGHT_SUM_TOLERANCE};
use crate::partition::{alternate, check_init, check_shapes, random_init, restart_seed, AlternateOptions, Clustering, RestartPolicy};

/// Exponent, offset policy and centre solver for the weighted algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverConfig {
    pub minkowski: MinkowskiConfig,
    #[serde(default)]
    pub centers: CenterSolverConfig,
}

impl SolverConfig {
    pub fn new(p: f64) -> Result<Self> {
        Ok(Self {
            minkowski: MinkowskiConfig::new(p)?,
            centers: CenterSolverConfig::default(),
        })
    }

    pub fn p(&self) -> f64 {
        self.minkowski.p
    }

    pub fn with_offset(mut self, enabled: bool) -> Self {
        self.minkowski.dispersion_offset_enabled = enabled;
        self
    }

    /// Rejects exponents the weight update cannot handle.
    pub fn validate_weighted(&self) -> Result<()> {
        validate_exponent(self.p())?;
        self.centers.validate()?;
        if self.p() <= 1.0 {
            return Err(ClusterError::InvalidConfig(format!(
                "weighted clustering needs p > 1 (use {} for p -> 1), got {}",
                crate::metric::P_NEAR_ONE,
                self.p()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionTable {
    k: usize,
    v: usize,
    /// Stored entries `D_kv + offset`.
    dispersions: Vec<f64>,
    pub offset: f64,
}

impl DispersionTable {
    /// Table from raw dispersions, optionally adding their mean to every entry.
    pub fn from_raw<R: AsRef<[f64]>>(rows: &[R], offset_enabled: bool) -> Result<Self> {
        let v = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut raw = Vec::with_capacity(rows.len() * v);
        for r in rows {
            let r = r.as_ref();
            if r.len() != v {
                return Err(ClusterError::DimensionMismatch {
                    expected: v,
                    got: r.len(),
                });
            }
            if r.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
                return Err(ClusterError::InvalidData("dispersions must be finite and >= 0".into()));
            }
            raw.extend_from_slice(r);
        }
        Ok(Self::with_offset(rows.len(), v, raw, offset_enabled))
    }

    fn with_offset(k: usize, v: usize, mut raw: Vec<f64>, offset_enabled: bool) -> Self {
        let offset = if offset_enabled && !raw.is_empty() {
            raw.iter().sum::<f64>() / raw.len() as f64
        } else {
            0.0
        };
        raw.iter_mut().for_each(|d| *d += offset);
        Self {
            k,
            v,
            dispersions: raw,
            offset,
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.k
    }

    pub fn n_features(&self) -> usize {
        self.v
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.dispersions[k * self.v..(k + 1) * self.v]
    }

    pub fn get(&self, k: usize, v: usize) -> f64 {
        self.dispersions[k * self.v + v]
    }
}

/// `D_kv = Σ_{i∈S_k} |y_iv − c_kv|^p`, plus the offset when enabled.
pub fn dispersions(
    data: &DataMatrix,
    clustering: &Clustering,
    p: f64,
    offset_enabled: bool,
) -> Result<DispersionTable> {
    validate_exponent(p)?;
    check_shapes(data, clustering)?;
    let rows: Vec<usize> = (0..data.n_entities()).collect();
    Ok(subset_dispersions(
        data,
        &rows,
        &clustering.assignments,
        &clustering.centroids,
        p,
        offset_enabled,
    ))
}

pub(crate) fn subset_dispersions(
    data: &DataMatrix,
    rows: &[usize],
    assignments: &[usize],
    centroids: &[Vec<f64>],
    p: f64,
    offset_enabled: bool,
) -> DispersionTable {
    let k = centroids.len();
    let v = data.n_features();
    let mut raw = vec![0.0; k * v];
    for (&i, &a) in rows.iter().zip(assignments) {
        let y = data.row(i);
        let c = &centroids[a];
        let slot = &mut raw[a * v..(a + 1) * v];
        for j in 0..v {
            slot[j] += pow_abs(y[j] - c[j], p);
        }
    }
    DispersionTable::with_offset(k, v, raw, offset_enabled)
}

/// Closed-form weight update: `w_kv = 1 / Σ_u (D_kv / D_ku)^{1/(p−1)}`.
///
/// Evaluated in the log domain so exponents near `p = 1` stay finite. A row
/// whose entries are all zero yields uniform weights.
pub fn update_weights(disp: &DispersionTable, p: f64) -> Result<WeightMatrix> {
    validate_exponent(p)?;
    if p <= 1.0 {
        return Err(ClusterError::InvalidConfig(
            "weight update is undefined at p = 1".into(),
        ));
    }
    let k = disp.k;
    let v = disp.v;
    let a = 1.0 / (p - 1.0);
    let mut out = WeightMatrix::uniform(k, v);
    for c in 0..k {
        let row = disp.row(c);
        if row.iter().all(|&d| d == 0.0) {
            continue;
        }
        if let Some(j) = row.iter().position(|&d| d == 0.0) {
            return Err(ClusterError::ZeroDispersion { cluster: c, feature: j });
        }
        let logs: Vec<f64> = row.iter().map(|&d| -a * d.ln()).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w = out.row_mut(c);
        let mut total = 0.0;
        for (wj, &l) in w.iter_mut().zip(&logs) {
            *wj = (l - top).exp();
            total += *wj;
        }
        w.iter_mut().for_each(|x| *x /= total);
        debug_assert!((w.iter().sum::<f64>() - 1.0).abs() < WEIGHT_SUM_TOLERANCE);
    }
    Ok(out)
}

fn check_weights(data: &DataMatrix, k: usize, w: &WeightMatrix) -> Result<()> {
    if w.n_clusters() != k || w.n_features() != data.n_features() {
        return Err(ClusterError::DimensionMismatch {
            expected: k * data.n_features(),
            got: w.n_clusters() * w.n_features(),
        });
    }
    for (r, row) in w.rows().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > WEIGHT_SUM_TOLERANCE || row.iter().any(|&x| !(x >= 0.0)) {
            return Err(ClusterError::InvalidConfig(format!(
                "initial weight row {r} is not on the simplex"
            )));
        }
    }
    Ok(())
}

/// MWK-Means from the given centroids and weights. The returned clustering
/// carries the final weights and the weighted criterion.
pub fn mwk_means(
    data: &DataMatrix,
    k: usize,
    init_centroids: &[Vec<f64>],
    init_weights: &WeightMatrix,
    cfg: &SolverConfig,
) -> Result<Clustering> {
    cfg.validate_weighted()?;
    let data = ensure_standardized(data)?;
    let data = data.as_ref();
    check_init(data, k, init_centroids)?;
    check_weights(data, k, init_weights)?;
    let p = cfg.p();
    let rows: Vec<usize> = (0..data.n_entities()).collect();
    let opts = AlternateOptions {
        p,
        centers: &cfg.centers,
        weighting: Some(cfg.minkowski.dispersion_offset_enabled),
        frozen: None,
        guard_nonempty: None,
        reseed_empty: true,
    };
    let state = alternate(
        data,
        &rows,
        init_centroids.to_vec(),
        Some(init_weights.clone()),
        &opts,
    )?;
    Ok(Clustering {
        assignments: state.assignments,
        centroids: state.centroids,
        weights: state.weights,
        criterion_value: state.criterion,
        k,
        p,
        iterations: state.iterations,
        trace: state.trace,
    })
}

/// MWK-Means from random entities with uniform initial weights; keeps the
/// run with the lowest weighted criterion.
pub fn mwk_multistart(
    data: &DataMatrix,
    k: usize,
    policy: &RestartPolicy,
    cfg: &SolverConfig,
) -> Result<Clustering> {
    if policy.n_restarts == 0 {
        return Err(ClusterError::InvalidConfig("n_restarts must be >= 1".into()));
    }
    let data = ensure_standardized(data)?;
    let data = data.as_ref();
    let uniform = WeightMatrix::uniform(k, data.n_features());
    let mut best: Option<Clustering> = None;
    let mut first_err = None;
    for r in 0..policy.n_restarts {
        let run = random_init(data, k, restart_seed(policy.rng_seed, r))
            .and_then(|init| mwk_means(data, k, &init, &uniform, cfg));
        match run {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.criterion_value < b.criterion_value) {
                    best = Some(c);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one restart ran"))
}
