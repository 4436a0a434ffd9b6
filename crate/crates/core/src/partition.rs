//! Alternating minimisation of the K-Means criterion under the p-th power
//! of the Minkowski distance: squared Euclidean K-Means at `p = 2`,
//! K-Medians at `p = 1`, Minkowski K-Means otherwise.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centers::{centroid_into, CenterSolverConfig};
use crate::dataset::{ensure_standardized, DataMatrix};
use crate::error::{ClusterError, Result};
use crate::metric::{minkowski_p_unchecked, pow_abs, validate_exponent, weighted_minkowski_p_pre, WeightMatrix};
use crate::pruned::alternate_euclidean;
use crate::seed::derive_seed;

/// Hard cap on assignment/update rounds.
pub const MAX_ITERATIONS: usize = 1000;

/// Slack allowed when checking that a criterion trace never increases.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub weights: Option<WeightMatrix>,
    pub criterion_value: f64,
    pub k: usize,
    /// Exponent of the distance the clustering was optimised under.
    pub p: f64,
    pub iterations: usize,
    /// Criterion after every centroid (and weight) update.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

impl Clustering {
    pub fn n_entities(&self) -> usize {
        self.assignments.len()
    }

    /// Member indices per cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        members_of(&self.assignments, self.k)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// True when no criterion increase larger than `slack` appears in the trace.
    pub fn trace_is_monotone(&self, slack: f64) -> bool {
        self.trace.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestartPolicy {
    pub n_restarts: usize,
    pub rng_seed: u64,
}

impl Default for RestartPolicy {
    fn default() -> Self {
        Self {
            n_restarts: 100,
            rng_seed: 0,
        }
    }
}

pub(crate) fn members_of(assignments: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        out[a].push(i);
    }
    out
}

/// Distance of `row` to centroid `c` of cluster `k` under the active metric.
#[inline]
pub(crate) fn active_distance(row: &[f64], c: &[f64], wp: Option<&[f64]>, p: f64) -> f64 {
    match wp {
        Some(w) => weighted_minkowski_p_pre(row, c, w, p),
        None => minkowski_p_unchecked(row, c, p),
    }
}

/// Nearest-centroid assignment of `rows`; ties go to the lowest cluster index.
pub(crate) fn assign_step(
    data: &DataMatrix,
    rows: &[usize],
    centroids: &[Vec<f64>],
    wp: Option<&[Vec<f64>]>,
    p: f64,
    out: &mut [usize],
) {
    for (slot, &i) in out.iter_mut().zip(rows) {
        let y = data.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, c) in centroids.iter().enumerate() {
            if let Some(d) = distance_below(y, c, wp.map(|w| w[k].as_slice()), p, best_d) {
                best_d = d;
                best = k;
            }
        }
        *slot = best;
    }
}

/// Active distance if it is strictly below `bound`. Accumulates in the same
/// order as [`active_distance`] and stops once the partial sum reaches `bound`.
#[inline]
fn distance_below(row: &[f64], c: &[f64], wp: Option<&[f64]>, p: f64, bound: f64) -> Option<f64> {
    let mut acc = 0.0;
    match wp {
        None if p == 2.0 => {
            for (x, y) in row.iter().zip(c) {
                acc += (x - y) * (x - y);
                if acc >= bound {
                    return None;
                }
            }
        }
        None => {
            for (x, y) in row.iter().zip(c) {
                acc += pow_abs(x - y, p);
                if acc >= bound {
                    return None;
                }
            }
        }
        Some(w) if p == 2.0 => {
            for ((x, y), w) in row.iter().zip(c).zip(w) {
                acc += w * (x - y) * (x - y);
                if acc >= bound {
                    return None;
                }
            }
        }
        Some(w) => {
            for ((x, y), w) in row.iter().zip(c).zip(w) {
                acc += w * pow_abs(x - y, p);
                if acc >= bound {
                    return None;
                }
            }
        }
    }
    (acc < bound).then_some(acc)
}

/// Refills every empty cluster with the entity farthest from that cluster's
/// stale centroid, taken from a cluster that can spare one.
pub(crate) fn reseed_empty(
    data: &DataMatrix,
    rows: &[usize],
    centroids: &mut [Vec<f64>],
    wp: Option<&[Vec<f64>]>,
    p: f64,
    assignments: &mut [usize],
) -> Result<bool> {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    let mut changed = false;
    for e in 0..k {
        if sizes[e] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (pos, &i) in rows.iter().enumerate() {
            if sizes[assignments[pos]] < 2 {
                continue;
            }
            let d = active_distance(data.row(i), &centroids[e], wp.map(|w| w[e].as_slice()), p);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((pos, d));
            }
        }
        let Some((pos, _)) = best else {
            return Err(ClusterError::Degenerate(format!(
                "cannot refill empty cluster {e}: no cluster has two members"
            )));
        };
        sizes[assignments[pos]] -= 1;
        sizes[e] = 1;
        assignments[pos] = e;
        centroids[e] = data.row(rows[pos]).to_vec();
        changed = true;
    }
    Ok(changed)
}

/// Recomputes centroids as Minkowski centres of their clusters. Clusters
/// listed in `frozen` and empty clusters keep their current centroid.
pub(crate) fn update_centroids(
    data: &DataMatrix,
    rows: &[usize],
    assignments: &[usize],
    p: f64,
    cfg: &CenterSolverConfig,
    centroids: &mut [Vec<f64>],
    frozen: Option<usize>,
) -> Result<()> {
    let k = centroids.len();
    let mut members = vec![Vec::new(); k];
    for (&i, &a) in rows.iter().zip(assignments) {
        members[a].push(i);
    }
    let mut scratch = Vec::new();
    for (c, (centroid, m)) in centroids.iter_mut().zip(&members).enumerate() {
        if Some(c) == frozen || m.is_empty() {
            continue;
        }
        centroid_into(data, m, p, cfg, &mut scratch, centroid)?;
    }
    Ok(())
}

/// Criterion over `rows`: Σ distance(entity, its centroid).
pub(crate) fn subset_criterion(
    data: &DataMatrix,
    rows: &[usize],
    assignments: &[usize],
    centroids: &[Vec<f64>],
    wp: Option<&[Vec<f64>]>,
    p: f64,
) -> f64 {
    rows.iter()
        .zip(assignments)
        .map(|(&i, &a)| active_distance(data.row(i), &centroids[a], wp.map(|w| w[a].as_slice()), p))
        .sum()
}

fn check_k(data: &DataMatrix, k: usize) -> Result<()> {
    if k == 0 || k > data.n_entities() {
        return Err(ClusterError::InvalidK {
            k,
            n: data.n_entities(),
        });
    }
    Ok(())
}

pub(crate) fn check_init(data: &DataMatrix, k: usize, init: &[Vec<f64>]) -> Result<()> {
    check_k(data, k)?;
    if init.len() != k {
        return Err(ClusterError::InvalidConfig(format!(
            "{} initial centroids supplied for k = {k}",
            init.len()
        )));
    }
    if let Some(bad) = init.iter().find(|c| c.len() != data.n_features()) {
        return Err(ClusterError::DimensionMismatch {
            expected: data.n_features(),
            got: bad.len(),
        });
    }
    if k >= 2 {
        let first = data.row(0);
        if data.rows().all(|r| r == first) {
            return Err(ClusterError::Degenerate(format!(
                "all entities are identical, cannot form {k} clusters"
            )));
        }
    }
    Ok(())
}

/// Options for [`alternate`], the loop shared by every K-Means variant.
pub(crate) struct AlternateOptions<'a> {
    pub p: f64,
    pub centers: &'a CenterSolverConfig,
    /// `Some(offset_enabled)` when feature weights are re-estimated each round.
    pub weighting: Option<bool>,
    /// Cluster whose centroid never moves.
    pub frozen: Option<usize>,
    /// Cluster that must stay non-empty: if an assignment pass empties it,
    /// the loop stops with the previous partition.
    pub guard_nonempty: Option<usize>,
    pub reseed_empty: bool,
}

pub(crate) struct AlternateState {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub weights: Option<WeightMatrix>,
    pub criterion: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Assignment / centroid update (/ weight update) rounds over `rows` until an
/// assignment pass leaves the partition unchanged.
pub(crate) fn alternate(
    data: &DataMatrix,
    rows: &[usize],
    mut centroids: Vec<Vec<f64>>,
    mut weights: Option<WeightMatrix>,
    opts: &AlternateOptions<'_>,
) -> Result<AlternateState> {
    let p = opts.p;
    let mut wp = weights.as_ref().map(|w| w.powered(p));
    let mut assignments = vec![0usize; rows.len()];
    assign_step(data, rows, &centroids, wp.as_deref(), p, &mut assignments);
    if opts.reseed_empty {
        reseed_empty(data, rows, &mut centroids, wp.as_deref(), p, &mut assignments)?;
    }

    let mut trace = Vec::new();
    let mut previous = assignments.clone();
    for iteration in 1..=MAX_ITERATIONS {
        update_centroids(data, rows, &assignments, p, opts.centers, &mut centroids, opts.frozen)?;
        if let Some(offset_enabled) = opts.weighting {
            let table = crate::mwk::subset_dispersions(data, rows, &assignments, &centroids, p, offset_enabled);
            let w = crate::mwk::update_weights(&table, p)?;
            wp = Some(w.powered(p));
            weights = Some(w);
        }
        let w = subset_criterion(data, rows, &assignments, &centroids, wp.as_deref(), p);
        trace.push(w);

        assign_step(data, rows, &centroids, wp.as_deref(), p, &mut assignments);
        if opts.reseed_empty {
            reseed_empty(data, rows, &mut centroids, wp.as_deref(), p, &mut assignments)?;
        }
        let guard_tripped = opts
            .guard_nonempty
            .is_some_and(|g| !assignments.contains(&g));
        if guard_tripped || assignments == previous {
            return Ok(AlternateState {
                assignments: previous,
                centroids,
                weights,
                criterion: w,
                iterations: iteration,
                trace,
            });
        }
        previous.copy_from_slice(&assignments);
    }
    Err(ClusterError::NoConvergence(MAX_ITERATIONS))
}

/// Lloyd-style K-Means under `minkowski_p`, starting from `init`.
///
/// Stops when an assignment pass leaves the partition unchanged.
pub fn kmeans(
    data: &DataMatrix,
    k: usize,
    p: f64,
    init: &[Vec<f64>],
    cfg: &CenterSolverConfig,
) -> Result<Clustering> {
    validate_exponent(p)?;
    cfg.validate()?;
    let data = ensure_standardized(data)?;
    let data = data.as_ref();
    check_init(data, k, init)?;

    let state = if p == 2.0 {
        alternate_euclidean(data, init.to_vec(), cfg)?
    } else {
        let rows: Vec<usize> = (0..data.n_entities()).collect();
        let opts = AlternateOptions {
            p,
            centers: cfg,
            weighting: None,
            frozen: None,
            guard_nonempty: None,
            reseed_empty: true,
        };
        alternate(data, &rows, init.to_vec(), None, &opts)?
    };
    debug_assert!(state.trace.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK * w[0].max(1.0)));
    Ok(Clustering {
        assignments: state.assignments,
        centroids: state.centroids,
        weights: None,
        criterion_value: state.criterion,
        k,
        p,
        iterations: state.iterations,
        trace: state.trace,
    })
}

/// Initial centroids: `k` distinct entities drawn without replacement.
pub fn random_init(data: &DataMatrix, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_k(data, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, data.n_entities(), k)
        .into_iter()
        .map(|i| data.row(i).to_vec())
        .collect())
}

/// Runs [`kmeans`] from `policy.n_restarts` random starts and keeps the run
/// with the smallest criterion (earliest restart on ties).
pub fn kmeans_multistart(
    data: &DataMatrix,
    k: usize,
    p: f64,
    policy: &RestartPolicy,
    cfg: &CenterSolverConfig,
) -> Result<Clustering> {
    kmeans_multistart_with(data, k, p, policy, cfg, &[])
}

/// As [`kmeans_multistart`], with extra deterministic starts tried after
/// the random ones.
pub fn kmeans_multistart_with(
    data: &DataMatrix,
    k: usize,
    p: f64,
    policy: &RestartPolicy,
    cfg: &CenterSolverConfig,
    extra_starts: &[Vec<Vec<f64>>],
) -> Result<Clustering> {
    if policy.n_restarts == 0 {
        return Err(ClusterError::InvalidConfig("n_restarts must be >= 1".into()));
    }
    let data = ensure_standardized(data)?;
    let data = data.as_ref();
    check_k(data, k)?;

    let random = (0..policy.n_restarts).map(|r| random_init(data, k, restart_seed(policy.rng_seed, r)));
    let extra = extra_starts.iter().map(|s| Ok(s.clone()));
    let mut best: Option<Clustering> = None;
    let mut first_err = None;
    for init in random.chain(extra) {
        match init.and_then(|init| kmeans(data, k, p, &init, cfg)) {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.criterion_value < b.criterion_value) {
                    best = Some(c);
                }
            }
            Err(e) => {
                log::debug!("restart failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one restart ran"))
}

pub fn restart_seed(seed: u64, restart: usize) -> u64 {
    derive_seed(seed, &[restart as u64])
}

/// Criterion of a clustering: Σ_k Σ_{i∈S_k} d(y_i, c_k), weighted when the
/// clustering carries weights.
pub fn criterion(data: &DataMatrix, clustering: &Clustering, p: f64) -> Result<f64> {
    validate_exponent(p)?;
    check_shapes(data, clustering)?;
    let rows: Vec<usize> = (0..data.n_entities()).collect();
    let wp = clustering.weights.as_ref().map(|w| w.powered(p));
    Ok(subset_criterion(
        data,
        &rows,
        &clustering.assignments,
        &clustering.centroids,
        wp.as_deref(),
        p,
    ))
}

pub(crate) fn check_shapes(data: &DataMatrix, clustering: &Clustering) -> Result<()> {
    if clustering.assignments.len() != data.n_entities() {
        return Err(ClusterError::DimensionMismatch {
            expected: data.n_entities(),
            got: clustering.assignments.len(),
        });
    }
    if clustering.centroids.len() != clustering.k {
        return Err(ClusterError::DimensionMismatch {
            expected: clustering.k,
            got: clustering.centroids.len(),
        });
    }
    if let Some(c) = clustering.centroids.iter().find(|c| c.len() != data.n_features()) {
        return Err(ClusterError::DimensionMismatch {
            expected: data.n_features(),
            got: c.len(),
        });
    }
    if let Some(&a) = clustering.assignments.iter().find(|&&a| a >= clustering.k) {
        return Err(ClusterError::InvalidData(format!(
            "assignment {a} out of range for k = {}",
            clustering.k
        )));
    }
    if let Some(w) = &clustering.weights {
        if w.n_clusters() != clustering.k || w.n_features() != data.n_features() {
            return Err(ClusterError::DimensionMismatch {
                expected: clustering.k * data.n_features(),
                got: w.n_clusters() * w.n_features(),
            });
        }
    }
    Ok(())
}

/// Euclidean means of each cluster of `assignments`.
pub fn euclidean_means(data: &DataMatrix, assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    let v = data.n_features();
    let mut sums = vec![vec![0.0; v]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, &y) in sums[a].iter_mut().zip(data.row(i)) {
            *s += y;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|x| *x /= c as f64);
        }
    }
    sums
}

/// Squared-Euclidean within-cluster sum about the cluster means, ignoring
/// whatever centroids the clusterer stored.
pub fn euclidean_wk(data: &DataMatrix, clustering: &Clustering) -> Result<f64> {
    check_shapes(data, clustering)?;
    Ok(euclidean_wk_assignments(data, &clustering.assignments, clustering.k))
}

pub fn euclidean_wk_assignments(data: &DataMatrix, assignments: &[usize], k: usize) -> f64 {
    let means = euclidean_means(data, assignments, k);
    assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| minkowski_p_unchecked(data.row(i), &means[a], 2.0))
        .sum()
}
