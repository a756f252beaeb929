//! Seeded synthetic regression datasets.
//!
//! Three generative rules are provided. `linear` and `nonlinear_mixture`
//! draw i.i.d. standard normal features per slot. `autoregressive_exogenous`
//! simulates an hourly series
//!
//! ```text
//! s_t = 0.5 s_{t-1} − 0.2 s_{t-2} + Σ_k b_k x_{t,k} + 1.5 sin(2πt/24) + u_t,   u_t ~ N(0, 0.5²)
//! y_t = s_t + noise · e_t
//! ```
//!
//! whose slot 0 holds lags of `y`, slot 1 the exogenous AR(1) drivers
//! `x_{t,k}`, and slots 2.. calendar harmonics. Train and test records are
//! split in time order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Linear,
    NonlinearMixture,
    AutoregressiveExogenous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_test: usize,
    /// Feature count of each component slot.
    pub features: Vec<usize>,
    pub rule: Rule,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Config("n_train and n_test must be positive".into()));
        }
        if self.features.is_empty() || self.features.contains(&0) {
            return Err(Error::Config("every slot needs at least one feature".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise must be non-negative, got {}", self.noise)));
        }
        Ok(())
    }
}

const LATENT_SHOCK: f64 = 0.5;
const BURN_IN: usize = 200;
const EXOGENOUS_PERSISTENCE: f64 = 0.7;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn slot_names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

/// Generates `(train, test)` from `spec`; identical specs give identical data.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_train + spec.n_test;
    let all = match spec.rule {
        Rule::Linear => iid_rule(spec, n, &mut rng, false)?,
        Rule::NonlinearMixture => iid_rule(spec, n, &mut rng, true)?,
        Rule::AutoregressiveExogenous => autoregressive(spec, n, &mut rng)?,
    };
    all.split_at(spec.n_train)
}

fn iid_rule(spec: &SyntheticSpec, n: usize, rng: &mut ChaCha8Rng, nonlinear: bool) -> Result<Dataset> {
    // Coefficients first so that they do not depend on `n`.
    let bias: f64 = normal(rng);
    let weights: Vec<Vec<f64>> = spec
        .features
        .iter()
        .map(|&d| (0..d).map(|_| normal(rng) / (d as f64).sqrt()).collect())
        .collect();
    let amplitudes: Vec<f64> = spec.features.iter().map(|_| rng.random_range(1.0..2.0)).collect();

    let values: Vec<Vec<f64>> = spec
        .features
        .iter()
        .map(|&d| (0..n * d).map(|_| normal(rng)).collect())
        .collect();
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let targets = (0..n)
        .map(|i| {
            let signal: f64 = weights
                .iter()
                .zip(&values)
                .zip(&amplitudes)
                .map(|((w, v), a)| {
                    let d = w.len();
                    let z: f64 = w.iter().zip(&v[i * d..(i + 1) * d]).map(|(w, x)| w * x).sum();
                    if nonlinear {
                        a * (1.5 * z).tanh() + 0.3 * z * z
                    } else {
                        z
                    }
                })
                .sum();
            bias + signal + noise.sample(rng)
        })
        .collect();
    let inputs = spec
        .features
        .iter()
        .zip(values)
        .map(|(&d, v)| FeatureMatrix::new(slot_names("x", d), n, v))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(inputs, targets)
}

#[allow(clippy::needless_range_loop)]
fn autoregressive(spec: &SyntheticSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let lags = spec.features[0];
    let exogenous = spec.features.get(1).copied().unwrap_or(0);
    let b: Vec<f64> = (0..exogenous)
        .map(|_| rng.random_range(0.5..1.5) * if rng.random() { 1.0 } else { -1.0 })
        .collect();

    let total = BURN_IN + lags + n;
    let mut x = vec![vec![0.0; exogenous]; total];
    let mut s = vec![0.0; total];
    let mut y = vec![0.0; total];
    for t in 0..total {
        for k in 0..exogenous {
            let prev = if t > 0 { x[t - 1][k] } else { 0.0 };
            x[t][k] = EXOGENOUS_PERSISTENCE * prev + normal(rng);
        }
        let s1 = if t >= 1 { s[t - 1] } else { 0.0 };
        let s2 = if t >= 2 { s[t - 2] } else { 0.0 };
        let drive: f64 = b.iter().zip(&x[t]).map(|(b, x)| b * x).sum();
        let season = 1.5 * (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin();
        s[t] = 0.5 * s1 - 0.2 * s2 + drive + season + LATENT_SHOCK * normal(rng);
        y[t] = s[t] + spec.noise * normal(rng);
    }

    let first = BURN_IN + lags;
    let records: Vec<usize> = (first..total).collect();
    let mut inputs = Vec::with_capacity(spec.features.len());
    let lag_values = records
        .iter()
        .flat_map(|&t| (1..=lags).map(move |l| t - l))
        .map(|t| y[t])
        .collect();
    inputs.push(FeatureMatrix::new(slot_names("lag", lags), n, lag_values)?);
    if exogenous > 0 {
        let v = records.iter().flat_map(|&t| x[t].iter().copied()).collect();
        inputs.push(FeatureMatrix::new(slot_names("x", exogenous), n, v)?);
    }
    for (slot, &d) in spec.features.iter().enumerate().skip(2) {
        // Harmonic `m` of period 24 / (slot − 1): sin then cos, alternating.
        let period = 24.0 / (slot - 1) as f64;
        let names = (0..d)
            .map(|i| format!("{}{}", if i % 2 == 0 { "sin" } else { "cos" }, i / 2 + 1))
            .collect();
        let v = records
            .iter()
            .flat_map(|&t| {
                (0..d).map(move |i| {
                    let w = 2.0 * std::f64::consts::PI * (i / 2 + 1) as f64 * t as f64 / period;
                    if i % 2 == 0 {
                        w.sin()
                    } else {
                        w.cos()
                    }
                })
            })
            .collect();
        inputs.push(FeatureMatrix::new(names, n, v)?);
    }
    Dataset::new(inputs, records.iter().map(|&t| y[t]).collect())
}
