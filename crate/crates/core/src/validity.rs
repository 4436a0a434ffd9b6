//! Cluster validity indexes and the rules that turn per-K index values into
//! an estimate of K.
//!
//! Silhouette and Dunn work on a dissimilarity matrix, by default the p-th
//! power of the Minkowski distance (squared Euclidean at `p = 2`).
//! Calinski–Harabasz and Hartigan are Euclidean-only and consume the
//! within-cluster sum of squares about the cluster means.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{ClusterError, Result};
use crate::metric::{minkowski_p_unchecked, validate_exponent};
use crate::partition::{check_shapes, euclidean_wk_assignments, Clustering};

/// Hartigan's rule of thumb: the first K with `HK ≤ 10` is selected.
pub const HARTIGAN_THRESHOLD: f64 = 10.0;

/// Symmetric N×N dissimilarity matrix.
#[derive(Debug, Clone)]
pub struct PairwiseDistances {
    n: usize,
    d: Vec<f64>,
}

impl PairwiseDistances {
    /// `d(i, j) = Σ_v |y_iv − y_jv|^p`.
    pub fn minkowski_power(data: &DataMatrix, p: f64) -> Result<Self> {
        validate_exponent(p)?;
        Ok(Self::build(data, |a, b| minkowski_p_unchecked(a, b, p)))
    }

    /// `d(i, j) = (Σ_v |y_iv − y_jv|^p)^{1/p}`, the metric form.
    pub fn minkowski_rooted(data: &DataMatrix, p: f64) -> Result<Self> {
        validate_exponent(p)?;
        Ok(Self::build(data, |a, b| minkowski_p_unchecked(a, b, p).powf(1.0 / p)))
    }

    fn build(data: &DataMatrix, dist: impl Fn(&[f64], &[f64]) -> f64) -> Self {
        let n = data.n_entities();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            let yi = data.row(i);
            for j in (i + 1)..n {
                let x = dist(yi, data.row(j));
                d[i * n + j] = x;
                d[j * n + i] = x;
            }
        }
        Self { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

fn cluster_sizes(assignments: &[usize], k: usize) -> Result<Vec<usize>> {
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        if a >= k {
            return Err(ClusterError::InvalidData(format!("assignment {a} out of range for k = {k}")));
        }
        sizes[a] += 1;
    }
    if let Some(e) = sizes.iter().position(|&s| s == 0) {
        return Err(ClusterError::InvalidData(format!("cluster {e} is empty")));
    }
    Ok(sizes)
}

fn need_two_clusters(k: usize) -> Result<()> {
    if k < 2 {
        return Err(ClusterError::InvalidConfig(format!(
            "validity index needs K >= 2, got {k}"
        )));
    }
    Ok(())
}

/// Per-entity silhouette widths. Members of singleton clusters get 0.
pub fn silhouette_values(dist: &PairwiseDistances, assignments: &[usize], k: usize) -> Result<Vec<f64>> {
    need_two_clusters(k)?;
    if assignments.len() != dist.len() {
        return Err(ClusterError::DimensionMismatch {
            expected: dist.len(),
            got: assignments.len(),
        });
    }
    let sizes = cluster_sizes(assignments, k)?;
    let mut sums = vec![0.0; k];
    let mut out = Vec::with_capacity(assignments.len());
    for (i, &own) in assignments.iter().enumerate() {
        if sizes[own] == 1 {
            out.push(0.0);
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (&d, &a) in dist.row(i).iter().zip(assignments) {
            sums[a] += d;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&l| l != own)
            .map(|l| sums[l] / sizes[l] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        out.push(if m > 0.0 { (b - a) / m } else { 0.0 });
    }
    Ok(out)
}

/// Mean silhouette width over all entities.
pub fn silhouette_from(dist: &PairwiseDistances, assignments: &[usize], k: usize) -> Result<f64> {
    let s = silhouette_values(dist, assignments, k)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

pub fn silhouette(data: &DataMatrix, clustering: &Clustering, p: f64) -> Result<f64> {
    check_shapes(data, clustering)?;
    let dist = PairwiseDistances::minkowski_power(data, p)?;
    silhouette_from(&dist, &clustering.assignments, clustering.k)
}

/// Smallest between-cluster point distance over largest within-cluster
/// point distance.
pub fn dunn_from(dist: &PairwiseDistances, assignments: &[usize], k: usize) -> Result<f64> {
    need_two_clusters(k)?;
    if assignments.len() != dist.len() {
        return Err(ClusterError::DimensionMismatch {
            expected: dist.len(),
            got: assignments.len(),
        });
    }
    cluster_sizes(assignments, k)?;
    let mut separation = f64::INFINITY;
    let mut diameter: f64 = 0.0;
    for (i, &ai) in assignments.iter().enumerate() {
        let row = dist.row(i);
        for (j, &aj) in assignments.iter().enumerate().skip(i + 1) {
            let d = row[j];
            if ai == aj {
                diameter = diameter.max(d);
            } else {
                separation = separation.min(d);
            }
        }
    }
    if diameter == 0.0 {
        return Err(ClusterError::Degenerate(
            "every cluster has zero diameter".into(),
        ));
    }
    Ok(separation / diameter)
}

pub fn dunn(data: &DataMatrix, clustering: &Clustering, p: f64) -> Result<f64> {
    check_shapes(data, clustering)?;
    let dist = PairwiseDistances::minkowski_power(data, p)?;
    dunn_from(&dist, &clustering.assignments, clustering.k)
}

/// Total scatter `T = Σ_i Σ_v (y_iv − ȳ_v)²`.
pub fn total_scatter(data: &DataMatrix) -> f64 {
    let n = data.n_entities() as f64;
    let v = data.n_features();
    let mut mean = vec![0.0; v];
    for r in data.rows() {
        for (m, &y) in mean.iter_mut().zip(r) {
            *m += y;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    data.rows().map(|r| minkowski_p_unchecked(r, &mean, 2.0)).sum()
}

pub fn calinski_harabasz_assignments(data: &DataMatrix, assignments: &[usize], k: usize) -> Result<f64> {
    let n = data.n_entities();
    if k < 2 || k + 1 > n {
        return Err(ClusterError::InvalidConfig(format!(
            "Calinski-Harabasz needs 2 <= K <= N-1, got K = {k}, N = {n}"
        )));
    }
    if assignments.len() != n {
        return Err(ClusterError::DimensionMismatch {
            expected: n,
            got: assignments.len(),
        });
    }
    cluster_sizes(assignments, k)?;
    let w = euclidean_wk_assignments(data, assignments, k);
    if w == 0.0 {
        return Err(ClusterError::Degenerate(
            "within-cluster sum of squares is zero".into(),
        ));
    }
    let t = total_scatter(data);
    Ok(((t - w) / (k - 1) as f64) / (w / (n - k) as f64))
}

/// `((T − W_K)/(K − 1)) / (W_K/(N − K))` with Euclidean `W_K` about the
/// cluster means, whatever centroids the clustering stores.
pub fn calinski_harabasz(data: &DataMatrix, clustering: &Clustering) -> Result<f64> {
    check_shapes(data, clustering)?;
    calinski_harabasz_assignments(data, &clustering.assignments, clustering.k)
}

/// `HK = (W_K / W_{K+1} − 1)(N − K − 1)`.
pub fn hartigan_index(w_k: f64, w_next: f64, n: usize, k: usize) -> f64 {
    let ratio = if w_next > 0.0 {
        w_k / w_next
    } else if w_k > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    (ratio - 1.0) * (n as f64 - k as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    Maximize,
    HartiganThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub index_name: String,
    /// Index value per K; the HK trace for Hartigan.
    pub per_k_values: BTreeMap<usize, f64>,
    pub selected_k: usize,
    pub selection_rule: SelectionRule,
}

/// Lowest K with `HK ≤ 10`; failing that, the K whose HK differs least
/// from HK at K+1.
pub fn select_hartigan(hk: &BTreeMap<usize, f64>) -> Result<usize> {
    if hk.is_empty() {
        return Err(ClusterError::InvalidData("empty Hartigan trace".into()));
    }
    if let Some((&k, _)) = hk.iter().find(|(_, &h)| h <= HARTIGAN_THRESHOLD) {
        return Ok(k);
    }
    let mut best: Option<(usize, f64)> = None;
    for (&k, &h) in hk {
        if let Some(&h_next) = hk.get(&(k + 1)) {
            let diff = (h - h_next).abs();
            if best.is_none_or(|(_, b)| diff < b) {
                best = Some((k, diff));
            }
        }
    }
    Ok(best.map(|(k, _)| k).unwrap_or_else(|| *hk.keys().next().expect("non-empty")))
}

/// Applies Hartigan's rule to a trace of Euclidean `W_K`. HK is defined at
/// every K whose successor is also in the trace.
pub fn hartigan_select(wk_trace: &BTreeMap<usize, f64>, n: usize) -> Result<KSelectionReport> {
    let hk: BTreeMap<usize, f64> = wk_trace
        .iter()
        .filter_map(|(&k, &w)| wk_trace.get(&(k + 1)).map(|&w1| (k, hartigan_index(w, w1, n, k))))
        .collect();
    if hk.is_empty() {
        return Err(ClusterError::InvalidData(
            "Hartigan needs W_K for at least two consecutive K".into(),
        ));
    }
    let selected_k = select_hartigan(&hk)?;
    Ok(KSelectionReport {
        index_name: CviIndex::Hartigan.to_string(),
        per_k_values: hk,
        selected_k,
        selection_rule: SelectionRule::HartiganThreshold,
    })
}

/// Argmax over K (ties go to the smallest K; NaN values are skipped), or
/// Hartigan's rule when `values` is an HK trace.
pub fn select_k(values: &BTreeMap<usize, f64>, rule: SelectionRule) -> Result<usize> {
    match rule {
        SelectionRule::HartiganThreshold => select_hartigan(values),
        SelectionRule::Maximize => {
            let mut best: Option<(usize, f64)> = None;
            for (&k, &x) in values {
                if x.is_nan() {
                    continue;
                }
                if best.is_none_or(|(_, b)| x > b) {
                    best = Some((k, x));
                }
            }
            best.map(|(k, _)| k)
                .ok_or_else(|| ClusterError::InvalidData("no index values to select from".into()))
        }
    }
}

pub fn maximize_report(index: CviIndex, values: BTreeMap<usize, f64>) -> Result<KSelectionReport> {
    let selected_k = select_k(&values, SelectionRule::Maximize)?;
    Ok(KSelectionReport {
        index_name: index.to_string(),
        per_k_values: values,
        selected_k,
        selection_rule: SelectionRule::Maximize,
    })
}

/// The validity indexes evaluated by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CviIndex {
    SilEucl,
    SilManh,
    SilMink,
    DunnEucl,
    DunnMink,
    Ch,
    Hartigan,
}

impl CviIndex {
    pub const ALL: [CviIndex; 7] = [
        CviIndex::SilEucl,
        CviIndex::SilManh,
        CviIndex::SilMink,
        CviIndex::DunnEucl,
        CviIndex::DunnMink,
        CviIndex::Ch,
        CviIndex::Hartigan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CviIndex::SilEucl => "sil_eucl",
            CviIndex::SilManh => "sil_manh",
            CviIndex::SilMink => "sil_mink",
            CviIndex::DunnEucl => "dunn_eucl",
            CviIndex::DunnMink => "dunn_mink",
            CviIndex::Ch => "ch",
            CviIndex::Hartigan => "hartigan",
        }
    }

    /// Exponent of the dissimilarity the index uses; `p_mink` is the
    /// exponent shared with the clusterer. `None` for the Euclidean-only
    /// sum-of-squares indexes.
    pub fn exponent(self, p_mink: f64) -> Option<f64> {
        match self {
            CviIndex::SilEucl | CviIndex::DunnEucl => Some(2.0),
            CviIndex::SilManh => Some(1.0),
            CviIndex::SilMink | CviIndex::DunnMink => Some(p_mink),
            CviIndex::Ch | CviIndex::Hartigan => None,
        }
    }

    pub fn rule(self) -> SelectionRule {
        match self {
            CviIndex::Hartigan => SelectionRule::HartiganThreshold,
            _ => SelectionRule::Maximize,
        }
    }

    pub fn is_silhouette(self) -> bool {
        matches!(self, CviIndex::SilEucl | CviIndex::SilManh | CviIndex::SilMink)
    }

    pub fn is_dunn(self) -> bool {
        matches!(self, CviIndex::DunnEucl | CviIndex::DunnMink)
    }
}

impl fmt::Display for CviIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CviIndex {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self> {
        CviIndex::ALL
            .into_iter()
            .find(|i| i.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| ClusterError::InvalidConfig(format!("unknown index '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four() -> (DataMatrix, Vec<usize>) {
        let d = DataMatrix::new_standardized(4, 1, vec![0.0, 1.0, 10.0, 11.0]).unwrap();
        (d, vec![0, 0, 1, 1])
    }

    #[test]
    fn silhouette_example() {
        let (d, a) = four();
        let dist = PairwiseDistances::minkowski_power(&d, 2.0).unwrap();
        let s = silhouette_values(&dist, &a, 2).unwrap();
        let s0 = (110.5 - 1.0) / 110.5;
        let s1 = (90.5 - 1.0) / 90.5;
        for (got, want) in s.iter().zip([s0, s1, s1, s0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let mean = silhouette_from(&dist, &a, 2).unwrap();
        assert!((mean - (s0 + s1) / 2.0).abs() < 1e-12);
        assert!((mean - 0.989950).abs() < 1e-6);
    }

    #[test]
    fn silhouette_edge_cases() {
        // collapsed clusters: a = 0 so every s = 1
        let d = DataMatrix::new_standardized(4, 1, vec![0.0, 0.0, 5.0, 5.0]).unwrap();
        let dist = PairwiseDistances::minkowski_power(&d, 2.0).unwrap();
        assert_eq!(silhouette_from(&dist, &[0, 0, 1, 1], 2).unwrap(), 1.0);
        // middle point equally far (on average) from both clusters
        let d = DataMatrix::new_standardized(4, 1, vec![-1.0, 0.0, 1.0, 2.0]).unwrap();
        let dist = PairwiseDistances::minkowski_power(&d, 1.0).unwrap();
        let s = silhouette_values(&dist, &[0, 0, 1, 1], 2).unwrap();
        // entity 1: a = 1, b = (1 + 2)/2 = 1.5; entity at 0 in a 3-point cluster instead:
        assert!((s[1] - (1.5 - 1.0) / 1.5).abs() < 1e-12);
        let s = silhouette_values(&dist, &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(s[0], 0.0, "singleton");
        let d = DataMatrix::new_standardized(3, 1, vec![-1.0, 0.0, 1.0]).unwrap();
        let dist = PairwiseDistances::minkowski_power(&d, 1.0).unwrap();
        // entity 1 in {−1, 0}: a = 1, b = 1
        assert_eq!(silhouette_values(&dist, &[0, 0, 1], 2).unwrap()[1], 0.0);
        assert!(silhouette_from(&dist, &[0, 0, 0], 1).is_err());
    }

    #[test]
    fn dunn_examples() {
        let (d, a) = four();
        let dist = PairwiseDistances::minkowski_power(&d, 2.0).unwrap();
        assert_eq!(dunn_from(&dist, &a, 2).unwrap(), 81.0);
        let dist = PairwiseDistances::minkowski_power(&d, 1.0).unwrap();
        assert_eq!(dunn_from(&dist, &a, 2).unwrap(), 9.0);
        let mut last = 0.0;
        for gap in [10.0, 20.0, 40.0] {
            let d = DataMatrix::new_standardized(4, 1, vec![0.0, 1.0, gap, gap + 1.0]).unwrap();
            let x = dunn(&d, &crate::partition::Clustering {
                assignments: a.clone(),
                centroids: vec![vec![0.5], vec![gap + 0.5]],
                weights: None,
                criterion_value: 0.0,
                k: 2,
                p: 2.0,
                iterations: 0,
                trace: vec![],
            }, 2.0).unwrap();
            assert!(x > last);
            last = x;
        }
        let d = DataMatrix::new_standardized(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let dist = PairwiseDistances::minkowski_power(&d, 2.0).unwrap();
        assert!(matches!(dunn_from(&dist, &[0, 1, 2], 3), Err(ClusterError::Degenerate(_))));
    }

    #[test]
    fn calinski_harabasz_example() {
        let (d, a) = four();
        assert_eq!(total_scatter(&d), 101.0);
        assert_eq!(calinski_harabasz_assignments(&d, &a, 2).unwrap(), 200.0);
        let d = DataMatrix::new_standardized(4, 1, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            calinski_harabasz_assignments(&d, &[0, 0, 1, 1], 2),
            Err(ClusterError::Degenerate(_))
        ));
    }

    #[test]
    fn hartigan_examples() {
        let trace = BTreeMap::from([(2, 100.0), (3, 50.0), (4, 48.0)]);
        let r = hartigan_select(&trace, 20).unwrap();
        assert!((r.per_k_values[&2] - 17.0).abs() < 1e-12);
        assert!((r.per_k_values[&3] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.selected_k, 3);

        let hk = BTreeMap::from([(2, 40.0), (3, 25.0), (4, 24.0)]);
        assert_eq!(select_hartigan(&hk).unwrap(), 3);

        let flat = BTreeMap::from([(2, 5.0), (3, 5.0), (4, 5.0), (5, 5.0)]);
        let r = hartigan_select(&flat, 100).unwrap();
        assert!(r.per_k_values.values().all(|&h| h == 0.0));
        assert_eq!(r.selected_k, 2);

        assert!(hartigan_select(&BTreeMap::from([(2, 1.0)]), 10).is_err());
    }

    #[test]
    fn argmax_examples() {
        let v = BTreeMap::from([(2, 0.5), (3, 0.9), (4, 0.7)]);
        assert_eq!(select_k(&v, SelectionRule::Maximize).unwrap(), 3);
        let v = BTreeMap::from([(2, 0.9), (3, 0.9)]);
        assert_eq!(select_k(&v, SelectionRule::Maximize).unwrap(), 2);
        let v = BTreeMap::from([(2, 0.1)]);
        assert_eq!(select_k(&v, SelectionRule::Maximize).unwrap(), 2);
        assert!(select_k(&BTreeMap::new(), SelectionRule::Maximize).is_err());
    }

    #[test]
    fn index_names_round_trip() {
        for i in CviIndex::ALL {
            assert_eq!(i.name().parse::<CviIndex>().unwrap(), i);
            assert_eq!(serde_json::to_string(&i).unwrap(), format!("\"{}\"", i.name()));
        }
        assert!("gap".parse::<CviIndex>().is_err());
    }
}
