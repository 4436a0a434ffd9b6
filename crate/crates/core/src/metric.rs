//! Distance kernels: the p-th power of the Minkowski distance, plain and
//! with per-feature weights.

use serde::{Deserialize, Serialize};

use crate::error::{ClusterError, Result};

/// Exponent substituted whenever "p → 1" is requested for a weighted method.
pub const P_NEAR_ONE: f64 = 1.00001;

/// Tolerance on weight-row sums.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiConfig {
    pub p: f64,
    /// Adds the mean raw dispersion to every dispersion before the weight update.
    pub dispersion_offset_enabled: bool,
}

impl MinkowskiConfig {
    pub fn new(p: f64) -> Result<Self> {
        validate_exponent(p)?;
        Ok(Self {
            p,
            dispersion_offset_enabled: true,
        })
    }

    /// The configuration used for "p → 1" in weighted methods.
    pub fn near_one() -> Self {
        Self {
            p: P_NEAR_ONE,
            dispersion_offset_enabled: true,
        }
    }

    /// Exponent usable by the weight update: exact 1 is replaced by [`P_NEAR_ONE`].
    pub fn weighted_exponent(&self) -> f64 {
        if self.p == 1.0 {
            P_NEAR_ONE
        } else {
            self.p
        }
    }

    pub fn p_near_one(&self) -> f64 {
        P_NEAR_ONE
    }
}

impl Default for MinkowskiConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            dispersion_offset_enabled: true,
        }
    }
}

pub fn validate_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p < 1.0 {
        return Err(ClusterError::InvalidConfig(format!(
            "Minkowski exponent must be finite and >= 1, got {p}"
        )));
    }
    Ok(())
}

/// `|x|^p` with exact fast paths for the common exponents.
#[inline]
pub fn pow_abs(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 2.0 {
        a * a
    } else if p == 1.0 {
        a
    } else if a == 0.0 {
        0.0
    } else {
        a.powf(p)
    }
}

/// `Σ_v |a_v − b_v|^p` without length checks.
#[inline]
pub fn minkowski_p_unchecked(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    } else if p == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| pow_abs(x - y, p)).sum()
    }
}

/// `Σ_v wp_v |a_v − b_v|^p` where `wp` already holds `w_v^p`.
#[inline]
pub fn weighted_minkowski_p_pre(a: &[f64], b: &[f64], wp: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        a.iter()
            .zip(b)
            .zip(wp)
            .map(|((x, y), w)| w * (x - y) * (x - y))
            .sum()
    } else {
        a.iter()
            .zip(b)
            .zip(wp)
            .map(|((x, y), w)| w * pow_abs(x - y, p))
            .sum()
    }
}

/// p-th power of the Minkowski distance (no p-th root).
pub fn minkowski_p(a: &[f64], b: &[f64], p: f64) -> Result<f64> {
    validate_exponent(p)?;
    if a.len() != b.len() {
        return Err(ClusterError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(minkowski_p_unchecked(a, b, p))
}

/// `Σ_v w_v^p |a_v − b_v|^p`.
pub fn weighted_minkowski_p(a: &[f64], b: &[f64], w: &[f64], p: f64) -> Result<f64> {
    validate_exponent(p)?;
    if a.len() != b.len() || a.len() != w.len() {
        return Err(ClusterError::DimensionMismatch {
            expected: a.len(),
            got: if a.len() != b.len() { b.len() } else { w.len() },
        });
    }
    if w.iter().any(|&x| !(x >= 0.0)) {
        return Err(ClusterError::InvalidConfig("weights must be nonnegative".into()));
    }
    let wp: Vec<f64> = w.iter().map(|&x| pow_abs(x, p)).collect();
    Ok(weighted_minkowski_p_pre(a, b, &wp, p))
}

/// K×V feature weights; each row lies on the unit simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    k: usize,
    v: usize,
    weights: Vec<f64>,
}

impl WeightMatrix {
    pub fn uniform(k: usize, v: usize) -> Self {
        Self {
            k,
            v,
            weights: vec![1.0 / v as f64; k * v],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let v = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut weights = Vec::with_capacity(rows.len() * v);
        for (k, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != v {
                return Err(ClusterError::DimensionMismatch {
                    expected: v,
                    got: row.len(),
                });
            }
            if row.iter().any(|&w| !(w >= 0.0)) {
                return Err(ClusterError::InvalidConfig(format!(
                    "weight row {k} has negative or NaN entries"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(ClusterError::InvalidConfig(format!(
                    "weight row {k} sums to {s}, not 1"
                )));
            }
            weights.extend_from_slice(row);
        }
        Ok(Self {
            k: rows.len(),
            v,
            weights,
        })
    }

    pub(crate) fn from_raw(k: usize, v: usize, weights: Vec<f64>) -> Self {
        debug_assert_eq!(weights.len(), k * v);
        Self { k, v, weights }
    }

    pub fn n_clusters(&self) -> usize {
        self.k
    }

    pub fn n_features(&self) -> usize {
        self.v
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.v..(k + 1) * self.v]
    }

    pub(crate) fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.weights[k * self.v..(k + 1) * self.v]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.weights.chunks_exact(self.v)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Rows of `w^p`, the factors that enter the weighted distance.
    pub fn powered(&self, p: f64) -> Vec<Vec<f64>> {
        self.rows()
            .map(|r| r.iter().map(|&w| pow_abs(w, p)).collect())
            .collect()
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut weights = Vec::with_capacity(rows.len() * self.v);
        for &r in rows {
            weights.extend_from_slice(self.row(r));
        }
        Self::from_raw(rows.len(), self.v, weights)
    }
}
