use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{ClusterError, Result};

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Adjusted Rand index between two labelings of the same entities.
///
/// When both partitions are trivial (one block each, or all singletons) the
/// chance correction is undefined; the result is then 1 for identical
/// partitions and 0 otherwise.
pub fn adjusted_rand<A: Hash + Eq, B: Hash + Eq>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(ClusterError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(ClusterError::Empty("no labels to compare".into()));
    }
    let mut ids_a = HashMap::new();
    let mut ids_b = HashMap::new();
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    for (x, y) in a.iter().zip(b) {
        let next = ids_a.len();
        let i = *ids_a.entry(x).or_insert(next);
        let next = ids_b.len();
        let j = *ids_b.entry(y).or_insert(next);
        if i == rows.len() {
            rows.push(0u64);
        }
        if j == cols.len() {
            cols.push(0u64);
        }
        rows[i] += 1;
        cols[j] += 1;
        *cells.entry((i, j)).or_insert(0) += 1;
    }
    let index = cells.values().map(|&c| pairs(c)).sum::<u64>() as f64;
    let sum_a = rows.iter().map(|&c| pairs(c)).sum::<u64>() as f64;
    let sum_b = cols.iter().map(|&c| pairs(c)).sum::<u64>() as f64;
    let total = pairs(a.len() as u64) as f64;
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        let identical = cells.len() == rows.len() && cells.len() == cols.len();
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// `|K − K_est| / K`.
pub fn relative_error(true_k: usize, est_k: usize) -> f64 {
    true_k.abs_diff(est_k) as f64 / true_k as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Sample standard deviation over `√n`; 0 for a single value.
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(values: &[f64]) -> Option<MeanSe> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanSe { mean, se, n })
}
