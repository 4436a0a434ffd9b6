//! Lloyd iterations for unweighted squared Euclidean K-Means that skip
//! distance computations ruled out by triangle-inequality bounds. The result
//! matches the plain loop: an entity keeps its cluster only when the bounds
//! prove that cluster is its unique nearest centroid.

use crate::centers::CenterSolverConfig;
use crate::dataset::DataMatrix;
use crate::error::{ClusterError, Result};
use crate::metric::minkowski_p_unchecked;
use crate::partition::{reseed_empty, subset_criterion, update_centroids, AlternateState, MAX_ITERATIONS};

/// Relative margin on bound comparisons.
const MARGIN: f64 = 1e-9;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    minkowski_p_unchecked(a, b, 2.0)
}

struct Bounds {
    k: usize,
    /// Distance to the assigned centroid (upper bound).
    upper: Vec<f64>,
    /// Row-major `n × k` lower bounds on the distance to every centroid.
    lower: Vec<f64>,
}

impl Bounds {
    /// Exact distances for the given assignment.
    fn exact(data: &DataMatrix, centroids: &[Vec<f64>], assignments: &[usize]) -> Self {
        let k = centroids.len();
        let mut upper = vec![0.0; assignments.len()];
        let mut lower = vec![0.0; assignments.len() * k];
        for (i, &a) in assignments.iter().enumerate() {
            let y = data.row(i);
            for (j, c) in centroids.iter().enumerate() {
                lower[i * k + j] = sq(y, c).sqrt();
            }
            upper[i] = lower[i * k + a];
        }
        Self { k, upper, lower }
    }

    /// Nearest centroid of every entity, ties to the lowest index, from
    /// exact distances.
    fn nearest(data: &DataMatrix, centroids: &[Vec<f64>], assignments: &mut [usize]) -> Self {
        let k = centroids.len();
        let mut upper = vec![0.0; assignments.len()];
        let mut lower = vec![0.0; assignments.len() * k];
        for (i, a) in assignments.iter_mut().enumerate() {
            let y = data.row(i);
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.iter().enumerate() {
                let d = sq(y, c);
                lower[i * k + j] = d.sqrt();
                if d < best.1 {
                    best = (j, d);
                }
            }
            *a = best.0;
            upper[i] = best.1.sqrt();
        }
        Self { k, upper, lower }
    }

    /// Nearest-centroid pass with ties to the lowest index. A centroid is
    /// only measured when the bounds cannot rule it out.
    fn assign(&mut self, data: &DataMatrix, centroids: &[Vec<f64>], assignments: &mut [usize]) {
        let k = self.k;
        let gaps = centre_distances(centroids);
        let half_gap: Vec<f64> = (0..k)
            .map(|a| 0.5 * (0..k).filter(|&b| b != a).map(|b| gaps[a * k + b]).fold(f64::INFINITY, f64::min))
            .collect();
        for (i, slot) in assignments.iter_mut().enumerate() {
            let mut a = *slot;
            let mut u = self.upper[i];
            if separated(u, half_gap[a]) {
                continue;
            }
            let y = data.row(i);
            let lower = &mut self.lower[i * k..(i + 1) * k];
            let mut exact: Option<f64> = None;
            for j in 0..k {
                if j == a || separated(u, lower[j]) || separated(u, 0.5 * gaps[a * k + j]) {
                    continue;
                }
                let da = match exact {
                    Some(d) => d,
                    None => {
                        let d = sq(y, &centroids[a]);
                        u = d.sqrt();
                        lower[a] = u;
                        exact = Some(d);
                        if separated(u, lower[j]) || separated(u, 0.5 * gaps[a * k + j]) {
                            continue;
                        }
                        d
                    }
                };
                let dj = sq(y, &centroids[j]);
                lower[j] = dj.sqrt();
                if dj < da || (dj == da && j < a) {
                    a = j;
                    u = lower[j];
                    exact = Some(dj);
                }
            }
            *slot = a;
            self.upper[i] = u;
        }
    }

    fn shift(&mut self, drift: &[f64], assignments: &[usize]) {
        for (i, &a) in assignments.iter().enumerate() {
            self.upper[i] += drift[a];
            for (l, d) in self.lower[i * self.k..(i + 1) * self.k].iter_mut().zip(drift) {
                *l = (*l - d).max(0.0);
            }
        }
    }
}

fn separated(upper: f64, bound: f64) -> bool {
    upper + MARGIN * (1.0 + upper) < bound
}

/// Row-major `k × k` distances between centroids.
fn centre_distances(centroids: &[Vec<f64>]) -> Vec<f64> {
    let k = centroids.len();
    let mut out = vec![0.0; k * k];
    for a in 0..k {
        for b in a + 1..k {
            let d = sq(&centroids[a], &centroids[b]).sqrt();
            out[a * k + b] = d;
            out[b * k + a] = d;
        }
    }
    out
}

/// Same rounds and stopping rule as the generic loop at `p = 2` without
/// weights, over every entity of `data`.
pub(crate) fn alternate_euclidean(
    data: &DataMatrix,
    mut centroids: Vec<Vec<f64>>,
    centers: &CenterSolverConfig,
) -> Result<AlternateState> {
    let rows: Vec<usize> = (0..data.n_entities()).collect();
    let mut assignments = vec![0usize; rows.len()];
    let mut bounds = Bounds::nearest(data, &centroids, &mut assignments);
    if reseed_empty(data, &rows, &mut centroids, None, 2.0, &mut assignments)? {
        bounds = Bounds::exact(data, &centroids, &assignments);
    }

    let mut trace = Vec::new();
    let mut previous = assignments.clone();
    let mut old = centroids.clone();
    for iteration in 1..=MAX_ITERATIONS {
        old.clone_from(&centroids);
        update_centroids(data, &rows, &assignments, 2.0, centers, &mut centroids, None)?;
        let w = subset_criterion(data, &rows, &assignments, &centroids, None, 2.0);
        trace.push(w);

        let drift: Vec<f64> = old.iter().zip(&centroids).map(|(a, b)| sq(a, b).sqrt()).collect();
        bounds.shift(&drift, &assignments);
        bounds.assign(data, &centroids, &mut assignments);
        if reseed_empty(data, &rows, &mut centroids, None, 2.0, &mut assignments)? {
            bounds = Bounds::exact(data, &centroids, &assignments);
        }
        if assignments == previous {
            return Ok(AlternateState {
                assignments: previous,
                centroids,
                weights: None,
                criterion: w,
                iterations: iteration,
                trace,
            });
        }
        previous.copy_from_slice(&assignments);
    }
    Err(ClusterError::NoConvergence(MAX_ITERATIONS))
}
