//! Synthetic Gaussian (or t₃) mixtures with optional uniform noise features.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{ClusterError, Result};

pub const DEFAULT_SIGMA2: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    StudentT3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    /// Uniform over the global range of the informative columns.
    Uniform,
    /// Centred at the midpoint of that range with variance `sigma2`.
    Gaussian,
    /// Location-scale t₃ at the same midpoint with scale `√sigma2`.
    StudentT3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_entities: usize,
    pub n_informative: usize,
    pub k_true: usize,
    /// Extra noise features as a fraction of `n_informative`.
    #[serde(default)]
    pub noise_fraction: f64,
    #[serde(default = "default_family")]
    pub family: Family,
    /// Cluster probabilities; `None` means `1/K` each.
    #[serde(default)]
    pub cluster_proportions: Option<Vec<f64>>,
    /// Covariance between every pair of informative features within a cluster.
    #[serde(default)]
    pub correlation: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    /// Noise distribution; `None` picks one from the scenario (t₃ for the t
    /// family, Gaussian when features are correlated, uniform otherwise).
    #[serde(default)]
    pub noise_family: Option<NoiseFamily>,
    #[serde(default)]
    pub seed: u64,
}

fn default_family() -> Family {
    Family::Gaussian
}

fn default_sigma2() -> f64 {
    DEFAULT_SIGMA2
}

impl ScenarioSpec {
    /// Spherical Gaussian clusters, uniform proportions, uniform noise.
    pub fn standard(n_entities: usize, n_informative: usize, k_true: usize, noise_fraction: f64, seed: u64) -> Self {
        Self {
            n_entities,
            n_informative,
            k_true,
            noise_fraction,
            family: Family::Gaussian,
            cluster_proportions: None,
            correlation: 0.0,
            sigma2: DEFAULT_SIGMA2,
            noise_family: None,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn n_noise(&self) -> usize {
        (self.noise_fraction * self.n_informative as f64).round() as usize
    }

    pub fn n_features(&self) -> usize {
        self.n_informative + self.n_noise()
    }

    pub fn proportions(&self) -> Vec<f64> {
        self.cluster_proportions
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.k_true as f64; self.k_true])
    }

    pub fn effective_noise_family(&self) -> NoiseFamily {
        self.noise_family.unwrap_or(match self.family {
            Family::StudentT3 => NoiseFamily::StudentT3,
            Family::Gaussian if self.correlation > 0.0 => NoiseFamily::Gaussian,
            Family::Gaussian => NoiseFamily::Uniform,
        })
    }

    /// Short label such as `1000x12-3+6NF`.
    pub fn id(&self) -> String {
        let mut s = format!("{}x{}-{}", self.n_entities, self.n_informative, self.k_true);
        if self.n_noise() > 0 {
            s.push_str(&format!("+{}NF", self.n_noise()));
        }
        if self.family == Family::StudentT3 {
            s.push_str("-t3");
        }
        if self.correlation > 0.0 {
            s.push_str("-corr");
        }
        if self.cluster_proportions.is_some() {
            s.push_str("-prop");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ClusterError::InvalidConfig(m));
        if self.n_entities < 2 || self.n_informative < 1 || self.k_true < 1 {
            return bad(format!(
                "need N >= 2, V >= 1, K >= 1; got {}x{}-{}",
                self.n_entities, self.n_informative, self.k_true
            ));
        }
        if self.k_true > self.n_entities {
            return bad(format!("K = {} exceeds N = {}", self.k_true, self.n_entities));
        }
        if !(self.noise_fraction.is_finite() && self.noise_fraction >= 0.0) {
            return bad(format!("noise fraction {} is invalid", self.noise_fraction));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return bad(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !(self.correlation.is_finite() && self.correlation >= 0.0 && self.correlation < self.sigma2) {
            return bad(format!(
                "correlation must lie in [0, sigma2), got {}",
                self.correlation
            ));
        }
        if let Some(p) = &self.cluster_proportions {
            if p.len() != self.k_true {
                return bad(format!("{} proportions for K = {}", p.len(), self.k_true));
            }
            if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("proportions {p:?} are not a probability vector"));
            }
        }
        Ok(())
    }
}

/// Draws one data set: raw (unstandardized) values and the generating
/// cluster of every entity.
pub fn generate(spec: &ScenarioSpec) -> Result<(DataMatrix, Vec<usize>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, vi, k) = (spec.n_entities, spec.n_informative, spec.k_true);
    let vn = spec.n_noise();
    let v = vi + vn;

    let centroids: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..vi).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let picker = WeightedIndex::new(spec.proportions())
        .map_err(|e| ClusterError::InvalidConfig(format!("proportions: {e}")))?;
    let labels: Vec<usize> = (0..n).map(|_| picker.sample(&mut rng)).collect();

    let scale = spec.sigma2.sqrt();
    let shared = spec.correlation.sqrt();
    let own = (spec.sigma2 - spec.correlation).sqrt();
    let chi = ChiSquared::<f64>::new(3.0).expect("three degrees of freedom");

    let mut values = vec![0.0; n * v];
    let mut z = vec![0.0; vi];
    for (i, &label) in labels.iter().enumerate() {
        // compound symmetry: one factor shared by all informative features
        let z0: f64 = if spec.correlation > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        for zv in z.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *zv = shared * z0 + own * e;
        }
        let mix = match spec.family {
            Family::Gaussian => 1.0,
            Family::StudentT3 => (chi.sample(&mut rng) / 3.0).sqrt().recip(),
        };
        let row = &mut values[i * v..i * v + vi];
        for ((x, c), zv) in row.iter_mut().zip(&centroids[label]).zip(&z) {
            *x = c + zv * mix;
        }
    }

    if vn > 0 {
        let (lo, hi) = (0..n)
            .flat_map(|i| values[i * v..i * v + vi].iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        let mid = 0.5 * (lo + hi);
        let uniform = Uniform::new_inclusive(lo, hi)
            .map_err(|e| ClusterError::Degenerate(format!("noise domain: {e}")))?;
        let family = spec.effective_noise_family();
        for i in 0..n {
            for x in values[i * v + vi..(i + 1) * v].iter_mut() {
                *x = match family {
                    NoiseFamily::Uniform => uniform.sample(&mut rng),
                    NoiseFamily::Gaussian => mid + scale * rng.sample::<f64, _>(StandardNormal),
                    NoiseFamily::StudentT3 => {
                        let t = rng.sample::<f64, _>(StandardNormal) / (chi.sample(&mut rng) / 3.0).sqrt();
                        mid + scale * t
                    }
                };
            }
        }
    }
    Ok((DataMatrix::new(n, v, values)?, labels))
}
