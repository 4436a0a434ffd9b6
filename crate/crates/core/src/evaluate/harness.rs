//! Experiment harness: generate replicates, run every configured method over
//! its K range, pick K per validity index and score the pick against the
//! generating labels.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{adjusted_rand, mean_se, relative_error, MeanSe};
use crate::centers::CenterSolverConfig;
use crate::datagen::{generate, ScenarioSpec};
use crate::dataset::{ensure_standardized, standardize_range, DataMatrix};
use crate::error::{ClusterError, Result};
use crate::metric::{MinkowskiConfig, P_NEAR_ONE};
use crate::mwk::SolverConfig;
use crate::partition::{euclidean_wk_assignments, kmeans_multistart, Clustering, RestartPolicy};
use crate::rescale::{
    imwk_entries, imwk_search_path, rescale_kmeans_entries, rescaled_entries, ImwkPath, PipelineEntry,
};
use crate::seed::{derive_seed, hash_str};
use crate::validity::{
    calinski_harabasz_assignments, dunn_from, hartigan_select, maximize_report, silhouette_from, CviIndex,
    KSelectionReport, PairwiseDistances, SelectionRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Multistart K-Means on the standardized data (K-Medians for `sil_manh`).
    BaselineKmeans,
    Imwk,
    ImwkRescaled,
    ImwkRescaledKmeans,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::BaselineKmeans,
        Method::Imwk,
        Method::ImwkRescaled,
        Method::ImwkRescaledKmeans,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::BaselineKmeans => "baseline_kmeans",
            Method::Imwk => "imwk",
            Method::ImwkRescaled => "imwk_rescaled",
            Method::ImwkRescaledKmeans => "imwk_rescaled_kmeans",
        }
    }
}

/// `1.00001, 1.1, 1.2, …, 2.0, 2.5, 3.0`.
pub fn default_p_grid() -> Vec<f64> {
    std::iter::once(P_NEAR_ONE)
        .chain((11..=20).map(|i| i as f64 / 10.0))
        .chain([2.5, 3.0])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenarios: Vec<ScenarioSpec>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub p_grid: Vec<f64>,
    pub indexes: Vec<CviIndex>,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub master_seed: u64,
    pub dispersion_offset: bool,
    pub centers: CenterSolverConfig,
    /// Adds elapsed seconds to every record (breaks byte-reproducibility).
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenarios: Vec::new(),
            replicates: 1,
            methods: Method::ALL.to_vec(),
            p_grid: default_p_grid(),
            indexes: CviIndex::ALL.to_vec(),
            k_min: 2,
            k_max: 20,
            restarts: 100,
            master_seed: 0,
            dispersion_offset: true,
            centers: CenterSolverConfig::default(),
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ClusterError::InvalidConfig(m));
        if self.scenarios.is_empty() {
            return bad("no scenarios".into());
        }
        if self.replicates == 0 || self.restarts == 0 {
            return bad("replicates and restarts must be >= 1".into());
        }
        if self.k_min < 2 || self.k_max < self.k_min {
            return bad(format!("bad K range [{}, {}]", self.k_min, self.k_max));
        }
        if self.methods.is_empty() || self.indexes.is_empty() {
            return bad("no methods or no indexes".into());
        }
        if self.methods.iter().any(|&m| m != Method::BaselineKmeans) && self.p_grid.is_empty() {
            return bad("empty p grid".into());
        }
        for &p in &self.p_grid {
            MinkowskiConfig::new(p)?;
        }
        self.centers.validate()?;
        for s in &self.scenarios {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub scenario: String,
    pub replicate: usize,
    pub method: Method,
    /// Exponent of the weighted clusterer; `None` for the baseline.
    pub p: Option<f64>,
    pub index: CviIndex,
    pub selected_k: Option<usize>,
    pub true_k: usize,
    pub relative_error: Option<f64>,
    pub ari: Option<f64>,
    pub hit: Option<bool>,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scenario: String,
    pub method: Method,
    pub p: Option<f64>,
    pub index: CviIndex,
    pub n_records: usize,
    pub n_failed: usize,
    pub relative_error: Option<MeanSe>,
    pub ari: Option<MeanSe>,
    pub hit_rate: Option<MeanSe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub aggregates: Vec<AggregateRow>,
}

/// Seed of replicate `replicate` of `scenario`.
pub fn data_seed(master: u64, scenario: &ScenarioSpec, replicate: usize) -> u64 {
    derive_seed(master, &[hash_str(&scenario.id()), scenario.seed, replicate as u64])
}

/// Seed of one (method, p) cell of a replicate.
pub fn method_seed(data_seed: u64, method: Method, p: Option<f64>) -> u64 {
    derive_seed(data_seed, &[hash_str(method.name()), p.map_or(0, f64::to_bits)])
}

struct Replicate {
    scenario: usize,
    replicate: usize,
    seed: u64,
    data: DataMatrix,
    labels: Vec<usize>,
}

#[derive(Clone, Copy)]
enum Job {
    Baseline,
    Weighted(f64),
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let units: Vec<(usize, usize)> = (0..cfg.scenarios.len())
        .flat_map(|s| (0..cfg.replicates).map(move |r| (s, r)))
        .collect();
    let replicates: Vec<Replicate> = units
        .par_iter()
        .map(|&(s, r)| {
            let spec = &cfg.scenarios[s];
            let seed = data_seed(cfg.master_seed, spec, r);
            let (raw, labels) = generate(&spec.with_seed(seed))?;
            Ok(Replicate {
                scenario: s,
                replicate: r,
                seed,
                data: standardize_range(&raw)?,
                labels,
            })
        })
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    let weighted: Vec<Method> = cfg.methods.iter().copied().filter(|&m| m != Method::BaselineKmeans).collect();
    for rep in &replicates {
        if cfg.methods.contains(&Method::BaselineKmeans) {
            jobs.push((rep, Job::Baseline));
        }
        if !weighted.is_empty() {
            jobs.extend(cfg.p_grid.iter().map(|&p| (rep, Job::Weighted(p))));
        }
    }
    let records: Vec<Vec<ExperimentRecord>> = jobs
        .par_iter()
        .map(|&(rep, job)| {
            let start = Instant::now();
            let mut out = match job {
                Job::Baseline => baseline_records(cfg, rep),
                Job::Weighted(p) => weighted_records(cfg, rep, p, &weighted),
            };
            if cfg.record_wall_time {
                let t = start.elapsed().as_secs_f64();
                out.iter_mut().for_each(|r| r.wall_time = Some(t));
            }
            log::info!(
                "{} replicate {} {}: done",
                cfg.scenarios[rep.scenario].id(),
                rep.replicate,
                match job {
                    Job::Baseline => "baseline".to_string(),
                    Job::Weighted(p) => format!("p = {p}"),
                }
            );
            out
        })
        .collect();
    let records: Vec<ExperimentRecord> = records.into_iter().flatten().collect();
    let aggregates = aggregate(&records);
    Ok(ExperimentOutput { records, aggregates })
}

fn record(
    cfg: &ExperimentConfig,
    rep: &Replicate,
    method: Method,
    p: Option<f64>,
    index: CviIndex,
    outcome: Outcome,
) -> ExperimentRecord {
    let true_k = cfg.scenarios[rep.scenario].k_true;
    let base = ExperimentRecord {
        scenario: cfg.scenarios[rep.scenario].id(),
        replicate: rep.replicate,
        method,
        p,
        index,
        selected_k: None,
        true_k,
        relative_error: None,
        ari: None,
        hit: None,
        failed: true,
        error: None,
        wall_time: None,
    };
    match outcome {
        Ok((k, ari)) => ExperimentRecord {
            selected_k: Some(k),
            relative_error: Some(relative_error(true_k, k)),
            ari: Some(ari),
            hit: Some(k == true_k),
            failed: false,
            ..base
        },
        Err(e) => ExperimentRecord {
            error: Some(e),
            ..base
        },
    }
}

/// K range, restarts and solver settings shared by every method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSettings {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub dispersion_offset: bool,
    pub centers: CenterSolverConfig,
}

impl ExperimentConfig {
    pub fn search(&self) -> SearchSettings {
        SearchSettings {
            k_min: self.k_min,
            k_max: self.k_max,
            restarts: self.restarts,
            dispersion_offset: self.dispersion_offset,
            centers: self.centers,
        }
    }
}

/// Multistart K-Means under `minkowski_p` at every K of the search range,
/// K-Medians when `p = 1`.
pub fn baseline_entries(data: &DataMatrix, p: f64, s: &SearchSettings, seed: u64) -> Result<Vec<PipelineEntry>> {
    let k_max = s.k_max.min(data.n_entities());
    (s.k_min..=k_max)
        .map(|k| {
            let policy = RestartPolicy {
                n_restarts: s.restarts,
                rng_seed: derive_seed(seed, &[p.to_bits(), k as u64]),
            };
            let c = kmeans_multistart(data, k, p, &policy, &s.centers)?;
            Ok(PipelineEntry {
                k,
                cvi_centroids: c.centroids.clone(),
                clustering: c,
                cvi_data: None,
            })
        })
        .collect()
}

/// Solver for the weighted methods; `p = 1` runs at the near-one exponent.
pub fn weighted_solver(p: f64, s: &SearchSettings) -> Result<SolverConfig> {
    let exponent = MinkowskiConfig::new(p)?.weighted_exponent();
    Ok(SolverConfig {
        centers: s.centers,
        ..SolverConfig::new(exponent)?.with_offset(s.dispersion_offset)
    })
}

/// Entries of one weighted method built on a shared iMWK path.
pub fn weighted_entries(
    data: &DataMatrix,
    path: &ImwkPath,
    method: Method,
    solver: &SolverConfig,
    s: &SearchSettings,
    seed: u64,
) -> Result<Vec<PipelineEntry>> {
    match method {
        Method::Imwk => Ok(imwk_entries(path)),
        Method::ImwkRescaled => rescaled_entries(data, path),
        Method::ImwkRescaledKmeans => {
            let policy = RestartPolicy {
                n_restarts: s.restarts,
                rng_seed: seed,
            };
            rescale_kmeans_entries(data, path, &policy, solver)
        }
        Method::BaselineKmeans => Err(ClusterError::InvalidConfig(
            "the baseline has no iMWK path".into(),
        )),
    }
}

/// Selected K for one index together with the clustering at that K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub report: KSelectionReport,
    pub clustering: Clustering,
}

fn report_for(index: CviIndex, per_k: BTreeMap<usize, f64>, n: usize) -> Result<KSelectionReport> {
    match index.rule() {
        SelectionRule::Maximize => maximize_report(index, per_k),
        SelectionRule::HartiganThreshold if per_k.len() == 1 => {
            let selected_k = *per_k.keys().next().expect("one K");
            Ok(KSelectionReport {
                index_name: index.to_string(),
                per_k_values: BTreeMap::new(),
                selected_k,
                selection_rule: SelectionRule::HartiganThreshold,
            })
        }
        SelectionRule::HartiganThreshold => hartigan_select(&per_k, n),
    }
}

/// Runs `method` over the search range and picks K with `index`. The
/// baseline uses K-Medians for `sil_manh` and squared Euclidean otherwise;
/// the weighted methods use `p` for clustering and the Minkowski indexes.
pub fn estimate_k(
    data: &DataMatrix,
    method: Method,
    p: f64,
    index: CviIndex,
    s: &SearchSettings,
    seed: u64,
) -> Result<KEstimate> {
    let data = ensure_standardized(data)?;
    let data = data.as_ref();
    let (entries, p_mink) = match method {
        Method::BaselineKmeans => {
            let p_cluster = if index == CviIndex::SilManh { 1.0 } else { 2.0 };
            (baseline_entries(data, p_cluster, s, seed)?, 2.0)
        }
        _ => {
            let solver = weighted_solver(p, s)?;
            let path = imwk_search_path(data, s.k_min, s.k_max, &solver)?;
            (weighted_entries(data, &path, method, &solver, s, seed)?, p)
        }
    };
    let per_k = index_values(&entries, data, &[index], p_mink)
        .remove(&index)
        .unwrap_or_default();
    let report = report_for(index, per_k, data.n_entities())?;
    let clustering = entries
        .into_iter()
        .find(|e| e.k == report.selected_k)
        .expect("selected K was evaluated")
        .clustering;
    Ok(KEstimate { report, clustering })
}

fn baseline_records(cfg: &ExperimentConfig, rep: &Replicate) -> Vec<ExperimentRecord> {
    let seed = method_seed(rep.seed, Method::BaselineKmeans, None);
    let search = cfg.search();
    let euclid: Vec<CviIndex> = cfg.indexes.iter().copied().filter(|&i| i != CviIndex::SilManh).collect();
    let mut picks: HashMap<CviIndex, Outcome> = HashMap::new();
    if !euclid.is_empty() {
        match baseline_entries(&rep.data, 2.0, &search, seed) {
            Ok(entries) => picks.extend(outcomes(&entries, rep, &euclid, 2.0)),
            Err(e) => picks.extend(euclid.iter().map(|&i| (i, Err(e.to_string())))),
        }
    }
    if cfg.indexes.contains(&CviIndex::SilManh) {
        let pick = match baseline_entries(&rep.data, 1.0, &search, seed) {
            Ok(entries) => outcomes(&entries, rep, &[CviIndex::SilManh], 2.0)
                .remove(&CviIndex::SilManh)
                .expect("requested index"),
            Err(e) => Err(e.to_string()),
        };
        picks.insert(CviIndex::SilManh, pick);
    }
    cfg.indexes
        .iter()
        .map(|&i| {
            let outcome = picks.remove(&i).expect("every index evaluated");
            record(cfg, rep, Method::BaselineKmeans, None, i, outcome)
        })
        .collect()
}

fn weighted_records(cfg: &ExperimentConfig, rep: &Replicate, p: f64, methods: &[Method]) -> Vec<ExperimentRecord> {
    let search = cfg.search();
    let run = || -> Result<Vec<(Method, Vec<PipelineEntry>)>> {
        let solver = weighted_solver(p, &search)?;
        let path = imwk_search_path(&rep.data, cfg.k_min, cfg.k_max, &solver)?;
        methods
            .iter()
            .map(|&m| {
                let seed = method_seed(rep.seed, m, Some(p));
                Ok((m, weighted_entries(&rep.data, &path, m, &solver, &search, seed)?))
            })
            .collect()
    };
    match run() {
        Ok(per_method) => per_method
            .into_iter()
            .flat_map(|(m, entries)| {
                let mut picks = outcomes(&entries, rep, &cfg.indexes, p);
                cfg.indexes
                    .iter()
                    .map(|&i| record(cfg, rep, m, Some(p), i, picks.remove(&i).expect("evaluated")))
                    .collect::<Vec<_>>()
            })
            .collect(),
        Err(e) => methods
            .iter()
            .flat_map(|&m| {
                cfg.indexes
                    .iter()
                    .map(|&i| record(cfg, rep, m, Some(p), i, Err(e.to_string())))
                    .collect::<Vec<_>>()
            })
            .collect(),
    }
}

type Outcome = std::result::Result<(usize, f64), String>;

fn outcomes(entries: &[PipelineEntry], rep: &Replicate, indexes: &[CviIndex], p_mink: f64) -> HashMap<CviIndex, Outcome> {
    select_all(entries, &rep.data, &rep.labels, indexes, p_mink)
        .into_iter()
        .map(|(i, r)| (i, r.map_err(|e| e.to_string())))
        .collect()
}

/// Index values of every entry, keyed by index and K. Failed evaluations
/// become NaN and are skipped by the selection rules.
pub fn index_values(
    entries: &[PipelineEntry],
    standardized: &DataMatrix,
    indexes: &[CviIndex],
    p_mink: f64,
) -> BTreeMap<CviIndex, BTreeMap<usize, f64>> {
    let mut exponents: Vec<f64> = Vec::new();
    for e in indexes.iter().filter_map(|i| i.exponent(p_mink)) {
        if !exponents.contains(&e) {
            exponents.push(e);
        }
    }
    let build = |data: &DataMatrix| -> Vec<PairwiseDistances> {
        exponents
            .iter()
            .map(|&e| PairwiseDistances::minkowski_power(data, e).expect("validated exponent"))
            .collect()
    };
    let shared = entries.iter().any(|e| e.cvi_data.is_none()).then(|| build(standardized));

    let mut out: BTreeMap<CviIndex, BTreeMap<usize, f64>> = BTreeMap::new();
    for entry in entries {
        let data = entry.cvi_data(standardized);
        let own;
        let dists = match (&entry.cvi_data, &shared) {
            (None, Some(s)) => s,
            _ => {
                own = build(data);
                &own
            }
        };
        let (a, k) = (&entry.clustering.assignments, entry.k);
        for &index in indexes {
            let value = match index.exponent(p_mink) {
                Some(e) => {
                    let d = &dists[exponents.iter().position(|&x| x == e).expect("collected")];
                    if index.is_silhouette() {
                        silhouette_from(d, a, k)
                    } else {
                        dunn_from(d, a, k)
                    }
                }
                None if index == CviIndex::Ch => calinski_harabasz_assignments(data, a, k),
                None => Ok(euclidean_wk_assignments(data, a, k)),
            };
            let value = value.unwrap_or_else(|e| {
                log::debug!("{index} at K = {k}: {e}");
                f64::NAN
            });
            out.entry(index).or_default().insert(k, value);
        }
    }
    out
}

/// Picks K for every index and scores the clustering at that K against `labels`.
pub fn select_all(
    entries: &[PipelineEntry],
    standardized: &DataMatrix,
    labels: &[usize],
    indexes: &[CviIndex],
    p_mink: f64,
) -> HashMap<CviIndex, Result<(usize, f64)>> {
    let values = index_values(entries, standardized, indexes, p_mink);
    indexes
        .iter()
        .map(|&index| {
            let per_k = values.get(&index).cloned().unwrap_or_default();
            let pick = report_for(index, per_k, standardized.n_entities()).map(|r| r.selected_k);
            let scored = pick.and_then(|k| {
                let entry = entries.iter().find(|e| e.k == k).expect("selected K was evaluated");
                Ok((k, adjusted_rand(&entry.clustering.assignments, labels)?))
            });
            (index, scored)
        })
        .collect()
}

/// Mean ± standard error of RE, ARI and hit rate per (scenario, method, p,
/// index), in order of first appearance. Failed records are counted but not
/// averaged.
pub fn aggregate(records: &[ExperimentRecord]) -> Vec<AggregateRow> {
    type Key = (String, Method, Option<u64>, CviIndex);
    let mut order: Vec<Key> = Vec::new();
    let mut groups: HashMap<Key, Vec<&ExperimentRecord>> = HashMap::new();
    for r in records {
        let key = (r.scenario.clone(), r.method, r.p.map(f64::to_bits), r.index);
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rs = &groups[&key];
            let ok: Vec<&&ExperimentRecord> = rs.iter().filter(|r| !r.failed).collect();
            let re: Vec<f64> = ok.iter().filter_map(|r| r.relative_error).collect();
            let ari: Vec<f64> = ok.iter().filter_map(|r| r.ari).collect();
            let hit: Vec<f64> = ok.iter().filter_map(|r| r.hit.map(|h| f64::from(u8::from(h)))).collect();
            AggregateRow {
                scenario: key.0,
                method: key.1,
                p: key.2.map(f64::from_bits),
                index: key.3,
                n_records: rs.len(),
                n_failed: rs.len() - ok.len(),
                relative_error: mean_se(&re),
                ari: mean_se(&ari),
                hit_rate: mean_se(&hit),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    RelativeError,
    Ari,
    HitRate,
}

impl TableMetric {
    pub const ALL: [TableMetric; 3] = [TableMetric::RelativeError, TableMetric::Ari, TableMetric::HitRate];

    pub fn name(self) -> &'static str {
        match self {
            TableMetric::RelativeError => "relative_error",
            TableMetric::Ari => "ari",
            TableMetric::HitRate => "hit_rate",
        }
    }

    fn of(self, row: &AggregateRow) -> Option<MeanSe> {
        match self {
            TableMetric::RelativeError => row.relative_error,
            TableMetric::Ari => row.ari,
            TableMetric::HitRate => row.hit_rate,
        }
    }
}

/// Rows `(method, p)`, columns indexes, for one scenario and metric.
struct Table<'a> {
    rows: Vec<(Method, Option<f64>)>,
    columns: Vec<CviIndex>,
    cells: HashMap<(Method, Option<u64>, CviIndex), &'a AggregateRow>,
}

fn table<'a>(aggregates: &'a [AggregateRow], scenario: &str) -> Table<'a> {
    let mut t = Table {
        rows: Vec::new(),
        columns: Vec::new(),
        cells: HashMap::new(),
    };
    for a in aggregates.iter().filter(|a| a.scenario == scenario) {
        if !t.rows.contains(&(a.method, a.p)) {
            t.rows.push((a.method, a.p));
        }
        if !t.columns.contains(&a.index) {
            t.columns.push(a.index);
        }
        t.cells.insert((a.method, a.p.map(f64::to_bits), a.index), a);
    }
    t
}

fn p_label(p: Option<f64>) -> String {
    p.map_or_else(|| "-".to_string(), |p| p.to_string())
}

/// CSV table with a `_mean` and `_se` column per index.
pub fn table_csv(aggregates: &[AggregateRow], scenario: &str, metric: TableMetric) -> String {
    let t = table(aggregates, scenario);
    let mut s = String::from("method,p");
    for c in &t.columns {
        let _ = write!(s, ",{c}_mean,{c}_se");
    }
    s.push('\n');
    for &(m, p) in &t.rows {
        let _ = write!(s, "{},{}", m.name(), p_label(p));
        for &c in &t.columns {
            match t.cells.get(&(m, p.map(f64::to_bits), c)).and_then(|a| metric.of(a)) {
                Some(v) => {
                    let _ = write!(s, ",{:.6},{:.6}", v.mean, v.se);
                }
                None => s.push_str(",,"),
            }
        }
        s.push('\n');
    }
    s
}

/// Markdown table with `mean ± se` cells.
pub fn table_markdown(aggregates: &[AggregateRow], scenario: &str, metric: TableMetric) -> String {
    let t = table(aggregates, scenario);
    let mut s = format!("### {scenario}: {}\n\n| method | p |", metric.name());
    for c in &t.columns {
        let _ = write!(s, " {c} |");
    }
    s.push_str("\n|---|---|");
    s.push_str(&"---|".repeat(t.columns.len()));
    s.push('\n');
    for &(m, p) in &t.rows {
        let _ = write!(s, "| {} | {} |", m.name(), p_label(p));
        for &c in &t.columns {
            match t.cells.get(&(m, p.map(f64::to_bits), c)).and_then(|a| metric.of(a)) {
                Some(v) => {
                    let _ = write!(s, " {:.3} ± {:.3} |", v.mean, v.se);
                }
                None => s.push_str(" n/a |"),
            }
        }
        s.push('\n');
    }
    s
}

pub fn records_ndjson(records: &[ExperimentRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

fn file_stem(scenario: &str) -> String {
    scenario
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_+.".contains(c) { c } else { '_' })
        .collect()
}

/// Writes `records.ndjson` and `tables/<scenario>_<metric>.{csv,md}` under `dir`.
pub fn write_outputs(dir: &Path, output: &ExperimentOutput) -> Result<()> {
    let tables = dir.join("tables");
    fs::create_dir_all(&tables)?;
    fs::write(dir.join("records.ndjson"), records_ndjson(&output.records)?)?;
    let mut scenarios: Vec<&str> = Vec::new();
    for a in &output.aggregates {
        if !scenarios.contains(&a.scenario.as_str()) {
            scenarios.push(&a.scenario);
        }
    }
    for scenario in scenarios {
        for metric in TableMetric::ALL {
            let stem = format!("{}_{}", file_stem(scenario), metric.name());
            fs::write(tables.join(format!("{stem}.csv")), table_csv(&output.aggregates, scenario, metric))?;
            fs::write(tables.join(format!("{stem}.md")), table_markdown(&output.aggregates, scenario, metric))?;
        }
    }
    Ok(())
}
