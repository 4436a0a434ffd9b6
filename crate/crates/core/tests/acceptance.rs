//! Acceptance suite. Criteria 1–6 are property checks; 7–11 replicate the
//! benchmark findings on 1000x12-3 data at 20 replicates per scenario.
//!
//! Run with `cargo test -p mwk-core --test acceptance -- --nocapture` to see
//! one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use mwk_core::centers::{minkowski_center, minkowski_objective, CenterSolverConfig};
use mwk_core::datagen::ScenarioSpec;
use mwk_core::dataset::DataMatrix;
use mwk_core::evaluate::harness::{records_ndjson, run_experiment, ExperimentConfig, ExperimentRecord, Method};
use mwk_core::evaluate::adjusted_rand;
use mwk_core::metric::WeightMatrix;
use mwk_core::mwk::{mwk_means, update_weights, DispersionTable, SolverConfig};
use mwk_core::partition::{kmeans, random_init};
use mwk_core::validity::{
    calinski_harabasz_assignments, dunn_from, hartigan_select, select_hartigan, silhouette_from, CviIndex,
    PairwiseDistances,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {id:>2} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn random_standardized(rng: &mut ChaCha8Rng, n: usize, v: usize) -> DataMatrix {
    let values = (0..n * v).map(|_| rng.random_range(-0.5..0.5)).collect();
    DataMatrix::new_standardized(n, v, values).unwrap()
}

/// Random partition with at least two members per cluster.
fn random_partition(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut a: Vec<usize> = (0..n).map(|i| if i < 2 * k { i % k } else { rng.random_range(0..k) }).collect();
    for i in (1..n).rev() {
        a.swap(i, rng.random_range(0..=i));
    }
    a
}

#[test]
fn criterion_01_weight_update_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let centers = CenterSolverConfig::default();
    let mut worst_gap = f64::INFINITY;
    let mut comparisons = 0usize;
    for instance in 0..200 {
        let p = [1.2, 1.5, 2.0, 3.0][instance % 4];
        let (n, v, k) = (rng.random_range(12..40), rng.random_range(2..7), rng.random_range(2..5));
        let data = random_standardized(&mut rng, n, v);
        let a = random_partition(&mut rng, n, k);
        let raw: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                (0..v)
                    .map(|f| {
                        let col: Vec<f64> = (0..n).filter(|&i| a[i] == c).map(|i| data.get(i, f)).collect();
                        let mu = minkowski_center(&col, p, &centers).unwrap();
                        minkowski_objective(&col, mu, p)
                    })
                    .collect()
            })
            .collect();
        let w = update_weights(&DispersionTable::from_raw(&raw, false).unwrap(), p).unwrap();
        for c in 0..k {
            let cost = |row: &[f64]| row.iter().zip(&raw[c]).map(|(w, d)| w.powf(p) * d).sum::<f64>();
            let best = cost(w.row(c));
            for _ in 0..10_000 {
                let e: Vec<f64> = (0..v).map(|_| -rng.random::<f64>().ln()).collect();
                let s: f64 = e.iter().sum();
                let sample: Vec<f64> = e.iter().map(|x| x / s).collect();
                worst_gap = worst_gap.min(cost(&sample) - best);
                comparisons += 1;
            }
        }
    }
    report(
        1,
        "weight update beats random simplex rows",
        worst_gap >= -1e-12,
        format!("{comparisons} comparisons, min(random - optimal) = {worst_gap:.3e}"),
    );
}

#[test]
fn criterion_02_criterion_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let centers = CenterSolverConfig::default();
    let rise = |trace: &[f64]| trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let mut worst_rise = f64::NEG_INFINITY;
    let mut offset_rise = f64::NEG_INFINITY;
    let mut iterations = 0usize;
    for run in 0..100 {
        let p = [1.2, 1.5, 2.0, 3.0][run % 4];
        let (n, v, k) = (rng.random_range(30..120), rng.random_range(2..8), rng.random_range(2..6));
        let data = random_standardized(&mut rng, n, v);
        let init = random_init(&data, k, run as u64).unwrap();
        let uniform = WeightMatrix::uniform(k, v);
        let km = kmeans(&data, k, p, &init, &centers).unwrap();
        let exact = SolverConfig::new(p).unwrap().with_offset(false);
        let mwk = mwk_means(&data, k, &init, &uniform, &exact).unwrap();
        for trace in [&km.trace, &mwk.trace] {
            iterations += trace.len();
            worst_rise = worst_rise.max(rise(trace));
        }
        let offset = mwk_means(&data, k, &init, &uniform, &SolverConfig::new(p).unwrap()).unwrap();
        offset_rise = offset_rise.max(rise(&offset.trace));
    }
    report(
        2,
        "criterion never increases across iterations",
        worst_rise <= 1e-9,
        format!(
            "{iterations} iterations over 200 runs, largest rise {worst_rise:.3e} \
             (offset-smoothed weights, not asserted: {offset_rise:.3e})"
        ),
    );
}

/// Minimiser of `γ` over `lo + i·step`, `i = 0..=m`: binary search on the
/// sign of the forward difference (γ is convex), then an exhaustive scan of
/// the surrounding window.
fn grid_argmin(values: &[f64], p: f64, lo: f64, step: f64, m: usize) -> f64 {
    let g = |i: usize| minkowski_objective(values, lo + i as f64 * step, p);
    let (mut a, mut b) = (0usize, m);
    while a < b {
        let mid = (a + b) / 2;
        if g(mid + 1) >= g(mid) {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    let from = a.saturating_sub(2000);
    let to = (a + 2000).min(m);
    let best = (from..=to).min_by(|&x, &y| g(x).total_cmp(&g(y))).unwrap();
    lo + best as f64 * step
}

#[test]
fn criterion_03_minkowski_center_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let cfg = CenterSolverConfig::default();
    let mut worst_ratio = 0.0f64;
    let mut closed_form_err = 0.0f64;
    for _ in 0..100 {
        let n = 2 * rng.random_range(2..20) + 1;
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let m = 1_000_000;
        let step = (hi - lo) / m as f64;
        for p in [1.0, 1.2, 1.5, 2.0, 2.7, 3.0] {
            let mu = minkowski_center(&values, p, &cfg).unwrap();
            let grid = grid_argmin(&values, p, lo, step, m);
            let allowed = 2.0 * step + 1e-6;
            worst_ratio = worst_ratio.max((mu - grid).abs() / allowed);
            if p == 2.0 {
                let mean = values.iter().sum::<f64>() / n as f64;
                closed_form_err = closed_form_err.max((mu - mean).abs());
            }
            if p == 1.0 {
                let mut s = values.clone();
                s.sort_by(f64::total_cmp);
                closed_form_err = closed_form_err.max((mu - s[n / 2]).abs());
            }
        }
    }
    report(
        3,
        "Minkowski centre agrees with grid search",
        worst_ratio <= 1.0 && closed_form_err <= 1e-9,
        format!(
            "600 solves, largest |solver - grid| / allowance {worst_ratio:.3}, mean/median error {closed_form_err:.1e}"
        ),
    );
}

fn naive_silhouette(data: &DataMatrix, a: &[usize], k: usize, p: f64) -> f64 {
    let n = data.n_entities();
    let d = |i: usize, j: usize| -> f64 {
        data.row(i).iter().zip(data.row(j)).map(|(x, y)| (x - y).abs().powf(p)).sum()
    };
    let mut total = 0.0;
    for i in 0..n {
        let own: Vec<usize> = (0..n).filter(|&j| a[j] == a[i] && j != i).collect();
        if own.is_empty() {
            continue;
        }
        let ai = own.iter().map(|&j| d(i, j)).sum::<f64>() / own.len() as f64;
        let mut bi = f64::INFINITY;
        for c in (0..k).filter(|&c| c != a[i]) {
            let other: Vec<usize> = (0..n).filter(|&j| a[j] == c).collect();
            bi = bi.min(other.iter().map(|&j| d(i, j)).sum::<f64>() / other.len() as f64);
        }
        let m = ai.max(bi);
        if m > 0.0 {
            total += (bi - ai) / m;
        }
    }
    total / n as f64
}

fn naive_dunn(data: &DataMatrix, a: &[usize], p: f64) -> f64 {
    let n = data.n_entities();
    let mut sep = f64::INFINITY;
    let mut diam = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d: f64 = data.row(i).iter().zip(data.row(j)).map(|(x, y)| (x - y).abs().powf(p)).sum();
            if a[i] == a[j] {
                diam = diam.max(d);
            } else {
                sep = sep.min(d);
            }
        }
    }
    sep / diam
}

#[test]
fn criterion_04_validity_index_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for t in 0..50 {
        let (n, v, k) = (rng.random_range(8..=30), rng.random_range(1..5), rng.random_range(2..=4));
        let data = random_standardized(&mut rng, n, v);
        let a = random_partition(&mut rng, n, k);
        let p = [1.0, 1.5, 2.0, 2.7, 3.0][t % 5];
        let dist = PairwiseDistances::minkowski_power(&data, p).unwrap();
        let s = silhouette_from(&dist, &a, k).unwrap();
        let d = dunn_from(&dist, &a, k).unwrap();
        worst = worst
            .max((s - naive_silhouette(&data, &a, k, p)).abs())
            .max((d - naive_dunn(&data, &a, p)).abs() / d.max(1.0));
    }
    let example = DataMatrix::new_standardized(4, 1, vec![0.0, 1.0, 10.0, 11.0]).unwrap();
    let ch = calinski_harabasz_assignments(&example, &[0, 0, 1, 1], 2).unwrap();
    let first = hartigan_select(&BTreeMap::from([(2, 100.0), (3, 50.0), (4, 48.0)]), 20).unwrap();
    let second = select_hartigan(&BTreeMap::from([(2, 40.0), (3, 25.0), (4, 24.0)])).unwrap();
    let pass = worst <= 1e-9 && ch == 200.0 && first.selected_k == 3 && second == 3;
    report(
        4,
        "validity indexes match oracles",
        pass,
        format!(
            "max silhouette/dunn deviation {worst:.1e}, CH {ch}, Hartigan picks {} and {second}",
            first.selected_k
        ),
    );
}

#[test]
fn criterion_05_adjusted_rand() {
    let hand = adjusted_rand(&[1, 1, 2, 2], &[1, 1, 1, 2]).unwrap();
    let a = [0, 0, 1, 1, 2, 2, 2, 0];
    let b = [1, 0, 1, 1, 2, 0, 2, 0];
    let permuted: Vec<usize> = b.iter().map(|&x| [2, 0, 1][x]).collect();
    let invariant = adjusted_rand(&a, &b).unwrap() == adjusted_rand(&a, &permuted).unwrap();
    let identity = adjusted_rand(&a, &a).unwrap();
    report(
        5,
        "adjusted Rand index",
        hand == 0.0 && invariant && identity == 1.0,
        format!("hand example {hand}, permutation invariant {invariant}, identity {identity}"),
    );
}

#[test]
fn criterion_06_determinism() {
    let cfg = ExperimentConfig {
        scenarios: vec![ScenarioSpec::standard(80, 4, 3, 0.5, 0)],
        replicates: 2,
        p_grid: vec![1.4, 2.0],
        k_max: 6,
        restarts: 5,
        master_seed: 6,
        ..ExperimentConfig::default()
    };
    let first = records_ndjson(&run_experiment(&cfg).unwrap().records).unwrap();
    let second = records_ndjson(&run_experiment(&cfg).unwrap().records).unwrap();
    report(
        6,
        "records.ndjson is byte-identical across runs",
        first == second,
        format!("{} bytes, {} records", first.len(), first.lines().count()),
    );
}

const REPLICATES: usize = 20;
const MASTER_SEED: u64 = 2015;

fn scenario(noise_fraction: f64) -> ScenarioSpec {
    ScenarioSpec::standard(1000, 12, 3, noise_fraction, 0)
}

fn run(noise_fraction: f64, method: Method, p_grid: &[f64], indexes: &[CviIndex]) -> Vec<ExperimentRecord> {
    let cfg = ExperimentConfig {
        scenarios: vec![scenario(noise_fraction)],
        replicates: REPLICATES,
        methods: vec![method],
        p_grid: p_grid.to_vec(),
        indexes: indexes.to_vec(),
        master_seed: MASTER_SEED,
        ..ExperimentConfig::default()
    };
    run_experiment(&cfg).unwrap().records
}

struct Summary {
    n: usize,
    failed: usize,
    hit_rate: f64,
    mean_re: f64,
    mean_ari: f64,
}

fn summarize(records: &[ExperimentRecord], p: Option<f64>, index: CviIndex) -> Summary {
    let rs: Vec<&ExperimentRecord> = records.iter().filter(|r| r.p == p && r.index == index).collect();
    let ok: Vec<&&ExperimentRecord> = rs.iter().filter(|r| !r.failed).collect();
    let m = ok.len().max(1) as f64;
    // a failed record counts as a miss; RE and ARI average the successful ones
    Summary {
        n: rs.len(),
        failed: rs.len() - ok.len(),
        hit_rate: ok.iter().filter(|r| r.hit == Some(true)).count() as f64 / rs.len() as f64,
        mean_re: ok.iter().map(|r| r.relative_error.unwrap()).sum::<f64>() / m,
        mean_ari: ok.iter().map(|r| r.ari.unwrap()).sum::<f64>() / m,
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "hit {:.2}, RE {:.3}, ARI {:.3} (n = {}, failed {})",
            self.hit_rate, self.mean_re, self.mean_ari, self.n, self.failed
        )
    }
}

struct Replication {
    clean_baseline: Vec<ExperimentRecord>,
    clean_imwk: Vec<ExperimentRecord>,
    half_baseline: Vec<ExperimentRecord>,
    half_rescale_kmeans: Vec<ExperimentRecord>,
    half_rescaled: Vec<ExperimentRecord>,
    full_baseline: Vec<ExperimentRecord>,
    full_rescale_kmeans: Vec<ExperimentRecord>,
}

fn replication() -> &'static Replication {
    static CELL: OnceLock<Replication> = OnceLock::new();
    CELL.get_or_init(|| Replication {
        clean_baseline: run(0.0, Method::BaselineKmeans, &[], &[CviIndex::SilEucl, CviIndex::Hartigan]),
        clean_imwk: run(0.0, Method::Imwk, &[2.0], &[CviIndex::SilEucl]),
        half_baseline: run(0.5, Method::BaselineKmeans, &[], &[CviIndex::SilEucl]),
        half_rescale_kmeans: run(0.5, Method::ImwkRescaledKmeans, &[1.4], &[CviIndex::SilMink]),
        half_rescaled: run(0.5, Method::ImwkRescaled, &[1.7], &[CviIndex::SilEucl]),
        full_baseline: run(1.0, Method::BaselineKmeans, &[], &[CviIndex::SilEucl]),
        full_rescale_kmeans: run(1.0, Method::ImwkRescaledKmeans, &[1.7, 1.8], &[CviIndex::SilManh]),
    })
}

#[test]
fn criterion_07_imwk_finds_k_without_noise() {
    let s = summarize(&replication().clean_imwk, Some(2.0), CviIndex::SilEucl);
    report(7, "1000x12-3, iMWK p=2 + sil_eucl hit rate >= 0.75", s.hit_rate >= 0.75, s.to_string());
}

#[test]
fn criterion_08_rescale_kmeans_with_half_noise() {
    let r = replication();
    let ours = summarize(&r.half_rescale_kmeans, Some(1.4), CviIndex::SilMink);
    let base = summarize(&r.half_baseline, None, CviIndex::SilEucl);
    let pass = ours.hit_rate >= 0.65 && ours.mean_re <= 0.15 && ours.hit_rate > base.hit_rate;
    report(
        8,
        "1000x12-3+6NF, rescale+K-Means p=1.4 + sil_mink: hit >= 0.65, RE <= 0.15, beats baseline",
        pass,
        format!("ours: {ours}; baseline sil_eucl: {base}"),
    );
}

#[test]
fn criterion_09_noise_degrades_baseline_not_rescaling() {
    let r = replication();
    let clean = summarize(&r.clean_baseline, None, CviIndex::SilEucl);
    let noisy = summarize(&r.full_baseline, None, CviIndex::SilEucl);
    let p17 = summarize(&r.full_rescale_kmeans, Some(1.7), CviIndex::SilManh);
    let p18 = summarize(&r.full_rescale_kmeans, Some(1.8), CviIndex::SilManh);
    let drop = clean.hit_rate - noisy.hit_rate;
    let pass = drop >= 0.15 - 1e-12 && p17.hit_rate >= 0.55 && p18.hit_rate >= 0.55;
    report(
        9,
        "1000x12-3+12NF: baseline drops >= 15 points, rescale+K-Means p=1.7/1.8 + sil_manh hit >= 0.55",
        pass,
        format!("baseline clean {clean}; baseline noisy {noisy}; drop {drop:.2}; p=1.7 {p17}; p=1.8 {p18}"),
    );
}

#[test]
fn criterion_10_rescaled_ari_beats_baseline() {
    let r = replication();
    let ours = summarize(&r.half_rescaled, Some(1.7), CviIndex::SilEucl);
    let base = summarize(&r.half_baseline, None, CviIndex::SilEucl);
    report(
        10,
        "1000x12-3+6NF: mean ARI of rescaled iMWK p=1.7 + sil_eucl >= baseline",
        ours.mean_ari >= base.mean_ari,
        format!("ours: {ours}; baseline: {base}"),
    );
}

#[test]
fn criterion_11_hartigan_overestimates_without_noise() {
    let s = summarize(&replication().clean_baseline, None, CviIndex::Hartigan);
    report(11, "1000x12-3, baseline + Hartigan mean RE >= 1.0", s.mean_re >= 1.0, s.to_string());
}
