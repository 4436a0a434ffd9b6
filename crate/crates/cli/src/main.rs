use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use mwk_core::dataset::{read_csv, read_labeled_csv, write_labeled_csv};
use mwk_core::evaluate::{estimate_k, run_experiment, write_outputs, SearchSettings};
use mwk_core::metric::{MinkowskiConfig, WeightMatrix};
use mwk_core::{
    adjusted_rand, generate, imwk_means, kmeans_multistart, mwk_multistart, relative_error, standardize_range,
    CenterSolverConfig, ClusterError, Clustering, CviIndex, ErrorClass, ExperimentConfig, KSelectionReport, Method,
    RestartPolicy, ScenarioSpec, SolverConfig,
};

#[derive(Parser)]
#[command(name = "mwk", version, about = "Minkowski weighted K-Means toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic replicates of a scenario.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
    },
    /// Cluster a CSV at a fixed K.
    Cluster {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: ClusterMethod,
        #[arg(long)]
        k: usize,
        /// Minkowski exponent; defaults to 2 for kmeans and 1 for kmedians.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick K with a cluster validity index.
    EstimateK {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: EstimateMethod,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long)]
        index: CviIndex,
        #[arg(long, default_value_t = 2)]
        kmin: usize,
        #[arg(long, default_value_t = 20)]
        kmax: usize,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a clustering against the label column of a CSV.
    Evaluate {
        #[arg(long)]
        clustering: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment grid from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ClusterMethod {
    Kmeans,
    Kmedians,
    Mwk,
    Imwk,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimateMethod {
    Baseline,
    Imwk,
    ImwkRescaled,
    ImwkRescaledKmeans,
}

impl From<EstimateMethod> for Method {
    fn from(m: EstimateMethod) -> Self {
        match m {
            EstimateMethod::Baseline => Method::BaselineKmeans,
            EstimateMethod::Imwk => Method::Imwk,
            EstimateMethod::ImwkRescaled => Method::ImwkRescaled,
            EstimateMethod::ImwkRescaledKmeans => Method::ImwkRescaledKmeans,
        }
    }
}

/// Clustering written by `cluster` and read back by `evaluate`. Centroids
/// live in the range-standardized feature space.
#[derive(Debug, Serialize, Deserialize)]
struct ClusteringFile {
    method: ClusterMethod,
    k: usize,
    p: f64,
    seed: u64,
    assignments: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    weights: Option<WeightMatrix>,
    criterion: f64,
    iterations: usize,
}

#[derive(Debug, Serialize)]
struct EstimateFile {
    method: String,
    p: f64,
    #[serde(flatten)]
    report: KSelectionReport,
    assignments: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct Metrics {
    ari: f64,
    k: usize,
    true_k: usize,
    relative_error: f64,
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    id: String,
    replicate: usize,
    spec: &'a ScenarioSpec,
    true_k: usize,
    n_entities: usize,
    n_features: usize,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ClusterError> {
    Ok(serde_json::from_reader(fs::File::open(path)?)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ClusterError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn run_generate(spec: &Path, out: &Path, replicates: usize) -> Result<(), ClusterError> {
    let spec: ScenarioSpec = read_json(spec)?;
    spec.validate()?;
    fs::create_dir_all(out)?;
    for r in 0..replicates {
        let rep = spec.with_seed(spec.seed.wrapping_add(r as u64));
        let (data, labels) = generate(&rep)?;
        let labels: Vec<i64> = labels.iter().map(|&l| l as i64).collect();
        let stem = format!("{}_r{r}", spec.id());
        write_labeled_csv(&data, Some(&labels), out.join(format!("{stem}.csv")))?;
        let sidecar = Sidecar {
            id: spec.id(),
            replicate: r,
            spec: &rep,
            true_k: rep.k_true,
            n_entities: data.n_entities(),
            n_features: data.n_features(),
        };
        write_json(&out.join(format!("{stem}.json")), &sidecar)?;
        info!("wrote {stem}");
    }
    Ok(())
}

fn cluster_with(
    method: ClusterMethod,
    input: &Path,
    k: usize,
    p: Option<f64>,
    restarts: usize,
    seed: u64,
) -> Result<ClusteringFile, ClusterError> {
    let data = standardize_range(&read_csv(input, true)?)?;
    let policy = RestartPolicy {
        n_restarts: restarts,
        rng_seed: seed,
    };
    let centers = CenterSolverConfig::default();
    let weighted_p = || -> Result<f64, ClusterError> {
        let p = p.ok_or_else(|| ClusterError::InvalidConfig(format!("--p is required for {method:?}")))?;
        Ok(MinkowskiConfig::new(p)?.weighted_exponent())
    };
    let fit: Clustering = match method {
        ClusterMethod::Kmeans | ClusterMethod::Kmedians => {
            let default = if method == ClusterMethod::Kmeans { 2.0 } else { 1.0 };
            let p = p.unwrap_or(default);
            if p != default {
                warn!("{method:?} runs with p = {p}");
            }
            kmeans_multistart(&data, k, p, &policy, &centers)?
        }
        ClusterMethod::Mwk => mwk_multistart(&data, k, &policy, &SolverConfig::new(weighted_p()?)?)?,
        ClusterMethod::Imwk => imwk_means(&data, k, &SolverConfig::new(weighted_p()?)?)?,
    };
    Ok(ClusteringFile {
        method,
        k: fit.k,
        p: fit.p,
        seed,
        assignments: fit.assignments,
        centroids: fit.centroids,
        weights: fit.weights,
        criterion: fit.criterion_value,
        iterations: fit.iterations,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_estimate(
    input: &Path,
    method: EstimateMethod,
    p: f64,
    index: CviIndex,
    k_min: usize,
    k_max: usize,
    restarts: usize,
    seed: u64,
) -> Result<EstimateFile, ClusterError> {
    let data = standardize_range(&read_csv(input, true)?)?;
    let settings = SearchSettings {
        k_min,
        k_max,
        restarts,
        dispersion_offset: true,
        centers: CenterSolverConfig::default(),
    };
    let method = Method::from(method);
    let est = estimate_k(&data, method, p, index, &settings, seed)?;
    Ok(EstimateFile {
        method: method.name().to_string(),
        p,
        report: est.report,
        assignments: est.clustering.assignments,
    })
}

fn run_evaluate(clustering: &Path, labels: &Path) -> Result<Metrics, ClusterError> {
    let c: ClusteringFile = read_json(clustering)?;
    let labeled = read_labeled_csv(labels, true)?;
    let truth = labeled
        .labels
        .ok_or_else(|| ClusterError::InvalidData(format!("{} has no label column", labels.display())))?;
    let mut distinct = truth.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let true_k = distinct.len();
    Ok(Metrics {
        ari: adjusted_rand(&truth, &c.assignments)?,
        k: c.k,
        true_k,
        relative_error: relative_error(true_k, c.k),
    })
}

fn run(cli: Cli) -> Result<(), ClusterError> {
    match cli.command {
        Command::Generate { spec, out, replicates } => run_generate(&spec, &out, replicates),
        Command::Cluster {
            input,
            method,
            k,
            p,
            restarts,
            seed,
            out,
        } => write_json(&out, &cluster_with(method, &input, k, p, restarts, seed)?),
        Command::EstimateK {
            input,
            method,
            p,
            index,
            kmin,
            kmax,
            restarts,
            seed,
            out,
        } => write_json(&out, &run_estimate(&input, method, p, index, kmin, kmax, restarts, seed)?),
        Command::Evaluate { clustering, labels, out } => write_json(&out, &run_evaluate(&clustering, &labels)?),
        Command::Experiment { config, out } => {
            let cfg: ExperimentConfig = read_json(&config)?;
            let output = run_experiment(&cfg)?;
            write_outputs(&out, &output)?;
            info!("{} records written to {}", output.records.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            })
        }
    }
}
