//! Minkowski centres: the scalar `μ` minimising `γ(μ) = Σ_i |y_i − μ|^p`.
//!
//! `γ` is convex for `p ≥ 1` (strictly for `p > 1`) with its minimum inside
//! `[min y, max y]`, so the default solver keeps that bracket and shrinks it
//! with safeguarded Newton steps on `γ'` until it is narrower than the
//! tolerance. `p = 2` and `p = 1` are answered in closed form (mean, median).

use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{ClusterError, Result};
use crate::metric::{pow_abs, validate_exponent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMethod {
    /// Bracketed root search on the derivative of `γ`.
    Bracketing,
    /// Start from the mean and move by a fixed step while `γ` decreases.
    FixedStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CenterSolverConfig {
    pub abs_tolerance: f64,
    /// Step length of [`CenterMethod::FixedStep`].
    pub step: f64,
    pub max_iterations: usize,
    pub method: CenterMethod,
}

impl Default for CenterSolverConfig {
    fn default() -> Self {
        Self {
            abs_tolerance: 1e-6,
            step: 0.001,
            max_iterations: 10_000,
            method: CenterMethod::Bracketing,
        }
    }
}

impl CenterSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tolerance > 0.0) || !(self.step > 0.0) || self.max_iterations == 0 {
            return Err(ClusterError::InvalidConfig(format!(
                "bad centre solver settings: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `γ(μ) = Σ_i |y_i − μ|^p`.
pub fn minkowski_objective(values: &[f64], mu: f64, p: f64) -> f64 {
    values.iter().map(|&y| pow_abs(y - mu, p)).sum()
}

pub fn minkowski_center(values: &[f64], p: f64, cfg: &CenterSolverConfig) -> Result<f64> {
    validate_exponent(p)?;
    cfg.validate()?;
    if values.is_empty() {
        return Err(ClusterError::Empty("no values for Minkowski centre".into()));
    }
    if let Some(i) = values.iter().position(|x| !x.is_finite()) {
        return Err(ClusterError::NonFinite { row: i, column: 0 });
    }
    let mut scratch = values.to_vec();
    center_in_place(&mut scratch, p, cfg)
}

/// Same as [`minkowski_center`] but may reorder `values`; inputs are assumed valid.
pub(crate) fn center_in_place(values: &mut [f64], p: f64, cfg: &CenterSolverConfig) -> Result<f64> {
    if values.len() == 1 {
        return Ok(values[0]);
    }
    if p == 2.0 {
        return Ok(mean(values));
    }
    if p == 1.0 {
        return Ok(median(values));
    }
    match cfg.method {
        CenterMethod::Bracketing => Ok(bracketing(values, p, cfg)),
        CenterMethod::FixedStep => fixed_step(values, p, cfg),
    }
}

fn mean(values: &[f64]) -> f64 {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let (lo, hi) = min_max(values);
    m.clamp(lo, hi)
}

/// Median; for an even count, the average of the two central order statistics.
fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (left, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Returns `(γ'(μ)/p, γ''(μ)/p)`.
fn derivatives(values: &[f64], mu: f64, p: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut dg = 0.0;
    for &y in values {
        let d = mu - y;
        if d == 0.0 {
            if p < 2.0 {
                dg = f64::INFINITY;
            }
            continue;
        }
        let a = d.abs();
        let t = a.powf(p - 1.0);
        g += t.copysign(d);
        dg += (p - 1.0) * t / a;
    }
    (g, dg)
}

fn bracketing(values: &[f64], p: f64, cfg: &CenterSolverConfig) -> f64 {
    let (mut lo, mut hi) = min_max(values);
    if hi - lo <= cfg.abs_tolerance {
        return 0.5 * (lo + hi);
    }
    let tol = cfg.abs_tolerance;
    let mut x = mean(values);
    for _ in 0..cfg.max_iterations {
        let (g, dg) = derivatives(values, x, p);
        if g == 0.0 {
            return x;
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= tol {
            break;
        }
        let newton = x - g / dg;
        let mut next = if dg.is_finite() && dg > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        // tiny step: probe just past it
        if (next - x).abs() < 0.5 * tol {
            next = if g < 0.0 { x + 0.5 * tol } else { x - 0.5 * tol };
            next = next.clamp(lo, hi);
        }
        x = next;
    }
    polish(values, p, lo, hi)
}

/// Best of the bracket ends, its midpoint and any data point inside it.
fn polish(values: &[f64], p: f64, lo: f64, hi: f64) -> f64 {
    let mut best = 0.5 * (lo + hi);
    let mut best_g = minkowski_objective(values, best, p);
    let inside = values.iter().copied().filter(|&y| y >= lo && y <= hi);
    for x in [lo, hi].into_iter().chain(inside) {
        let g = minkowski_objective(values, x, p);
        if g < best_g {
            best = x;
            best_g = g;
        }
    }
    best
}

fn fixed_step(values: &[f64], p: f64, cfg: &CenterSolverConfig) -> Result<f64> {
    let step = cfg.step;
    let mut mu = mean(values);
    let mut here = minkowski_objective(values, mu, p);
    for _ in 0..cfg.max_iterations {
        let left = minkowski_objective(values, mu - step, p);
        let right = minkowski_objective(values, mu + step, p);
        if left < here && left <= right {
            mu -= step;
            here = left;
        } else if right < here {
            mu += step;
            here = right;
        } else {
            return Ok(mu);
        }
    }
    Err(ClusterError::NoConvergence(cfg.max_iterations))
}

/// Per-feature Minkowski centre of the listed rows.
pub fn cluster_centroid(
    data: &DataMatrix,
    members: &[usize],
    p: f64,
    cfg: &CenterSolverConfig,
) -> Result<Vec<f64>> {
    validate_exponent(p)?;
    cfg.validate()?;
    if members.is_empty() {
        return Err(ClusterError::Empty("cluster has no members".into()));
    }
    if let Some(&bad) = members.iter().find(|&&i| i >= data.n_entities()) {
        return Err(ClusterError::InvalidData(format!("member index {bad} out of range")));
    }
    let mut out = vec![0.0; data.n_features()];
    let mut scratch = Vec::with_capacity(members.len());
    centroid_into(data, members, p, cfg, &mut scratch, &mut out)?;
    Ok(out)
}

pub(crate) fn centroid_into(
    data: &DataMatrix,
    members: &[usize],
    p: f64,
    cfg: &CenterSolverConfig,
    scratch: &mut Vec<f64>,
    out: &mut [f64],
) -> Result<()> {
    debug_assert!(!members.is_empty());
    if p == 2.0 {
        out.iter_mut().for_each(|x| *x = 0.0);
        for &i in members {
            for (o, &y) in out.iter_mut().zip(data.row(i)) {
                *o += y;
            }
        }
        let n = members.len() as f64;
        out.iter_mut().for_each(|x| *x /= n);
        return Ok(());
    }
    for (j, o) in out.iter_mut().enumerate() {
        scratch.clear();
        scratch.extend(members.iter().map(|&i| data.get(i, j)));
        *o = center_in_place(scratch, p, cfg)?;
    }
    Ok(())
}
