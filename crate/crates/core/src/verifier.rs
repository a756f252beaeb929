//! Monte Carlo estimates of the improvement probabilities.
//!
//! Trial `t` draws from `ChaCha8(seed)` on stream `t`, so every trial is
//! independent of scheduling and results are merged by trial index.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::components::Component;
use crate::data::{check_assumptions, dot, width_bound_holds, Dataset, OutputVector};
use crate::error::{Error, Result};
use crate::growth::{grow_greedy, STRICT_TOLERANCE};
use crate::stacker::stack;

/// Resampling attempts per trial before giving up.
pub const MAX_RESAMPLES: usize = 1000;

/// Stream reserved for the fixed reference vector of the angle experiment.
const REFERENCE_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Every coordinate of every `f_j` and `y` is i.i.d. standard normal.
    Gaussian,
    /// `f_j = y + noise · e_j` with standard normal `y` and `e_j`.
    Correlated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub n: usize,
    #[serde(default = "default_one")]
    pub k: usize,
    #[serde(default = "default_one")]
    pub h: usize,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sampler")]
    pub distribution: Sampler,
    /// Noise scale of the correlated sampler.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    /// Gluing activation of multilayer trials.
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

fn default_one() -> usize {
    1
}
fn default_sampler() -> Sampler {
    Sampler::Gaussian
}
fn default_noise() -> f64 {
    1.0
}
fn default_c() -> f64 {
    1.0
}
fn default_activation() -> Activation {
    Activation::Logistic
}

impl TrialConfig {
    pub fn new(n: usize, k: usize, h: usize, trials: usize, seed: u64) -> Self {
        Self {
            n,
            k,
            h,
            trials,
            seed,
            distribution: Sampler::Gaussian,
            noise: 1.0,
            c: 1.0,
            activation: Activation::Logistic,
        }
    }

    /// `η = arccos(c/√N)`.
    pub fn eta(&self) -> f64 {
        (self.c / (self.n as f64).sqrt()).acos()
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise must be non-negative, got {}", self.noise)));
        }
        Ok(())
    }

    fn validate_stacking(&self) -> Result<()> {
        self.validate()?;
        if self.k == 0 || self.h == 0 {
            return Err(Error::Config("k and h must be at least 1".into()));
        }
        if !width_bound_holds(self.k, self.n) {
            return Err(Error::WidthBound { k: self.k, n: self.n });
        }
        Ok(())
    }

    fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub empirical_frequency: f64,
    pub theoretical_bound: f64,
    pub margin: f64,
    pub pass: bool,
    pub trials: usize,
    pub successes: usize,
    /// Half-width of the 95% normal-approximation binomial interval.
    pub ci_halfwidth: f64,
    /// Samples discarded because they violated linear independence or had a perfect component.
    pub resampled: usize,
}

impl BoundReport {
    pub fn new(successes: usize, trials: usize, theoretical_bound: f64, resampled: usize) -> Self {
        let p = successes as f64 / trials as f64;
        let ci_halfwidth = 1.96 * (p * (1.0 - p) / trials as f64).sqrt();
        Self {
            empirical_frequency: p,
            theoretical_bound,
            margin: p - theoretical_bound,
            pass: p + ci_halfwidth >= theoretical_bound,
            trials,
            successes,
            ci_halfwidth,
            resampled,
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: frequency {:.4} ({}/{}) ± {:.4} vs bound {:.4}",
            if self.pass { "PASS" } else { "FAIL" },
            self.empirical_frequency,
            self.successes,
            self.trials,
            self.ci_halfwidth,
            self.theoretical_bound
        )
    }
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// True when the angle between `u` and `v` is within `eta` of a right angle.
pub fn angle_in_band(u: &[f64], v: &[f64], eta: f64) -> bool {
    let cos = dot(u, v) / (dot(u, u).sqrt() * dot(v, v).sqrt());
    let angle = cos.clamp(-1.0, 1.0).acos();
    (angle - FRAC_PI_2).abs() <= eta
}

/// In two dimensions the angle to a fixed vector is uniform on `[0, π]`.
pub fn planar_band_probability(eta: f64) -> f64 {
    (2.0 * eta / std::f64::consts::PI).min(1.0)
}

/// Frequency of random directions lying within `η` of perpendicular to a
/// fixed vector, against `1 − 1/√N`.
pub fn angle_concentration(cfg: &TrialConfig) -> Result<BoundReport> {
    cfg.validate()?;
    if cfg.n < 2 {
        return Err(Error::DegenerateDimension(cfg.n));
    }
    let eta = cfg.eta();
    if !eta.is_finite() {
        return Err(Error::Config(format!("c/√N must be at most 1, got c = {}", cfg.c)));
    }
    let u = gaussian_vector(&mut cfg.trial_rng(REFERENCE_STREAM), cfg.n);
    let successes = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let v = gaussian_vector(&mut cfg.trial_rng(t), cfg.n);
            usize::from(angle_in_band(&u, &v, eta))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let bound = 1.0 - 1.0 / (cfg.n as f64).sqrt();
    Ok(BoundReport::new(successes, cfg.trials, bound, 0))
}

/// One sampled instance: targets and the `K` component outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub targets: Vec<f64>,
    pub outputs: Vec<OutputVector>,
}

impl Instance {
    /// Outputs with the constant-one output first.
    pub fn with_bias(&self) -> Vec<OutputVector> {
        let mut all = vec![OutputVector::ones(self.targets.len())];
        all.extend(self.outputs.iter().cloned());
        all
    }

    /// Linear independence and no perfect output, over `[K]+`.
    pub fn admissible(&self) -> Result<bool> {
        let report = check_assumptions(&self.with_bias(), &self.targets)?;
        Ok(report.a1_linear_independence && report.a2_no_perfect_component)
    }

    /// Strict improvement of the optimal stack over every single output.
    pub fn stack_improves(&self) -> Result<bool> {
        Ok(stack(&self.with_bias(), &self.targets)?.improves_on_best(STRICT_TOLERANCE))
    }
}

fn sample_instance(cfg: &TrialConfig, rng: &mut ChaCha8Rng) -> Result<Instance> {
    let targets = gaussian_vector(rng, cfg.n);
    let outputs = (0..cfg.k)
        .map(|_| {
            let e = gaussian_vector(rng, cfg.n);
            let v = match cfg.distribution {
                Sampler::Gaussian => e,
                Sampler::Correlated => targets.iter().zip(&e).map(|(y, e)| y + cfg.noise * e).collect(),
            };
            OutputVector::new(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Instance { targets, outputs })
}

/// Draws instances on the trial's stream until one is admissible.
/// Returns the instance and the number of discarded draws.
pub fn sample_admissible(cfg: &TrialConfig, trial: u64) -> Result<(Instance, usize)> {
    let mut rng = cfg.trial_rng(trial);
    for discarded in 0..MAX_RESAMPLES {
        let inst = sample_instance(cfg, &mut rng)?;
        if inst.admissible()? {
            return Ok((inst, discarded));
        }
    }
    Err(Error::SamplerExhausted(trial as usize))
}

fn run_trials(cfg: &TrialConfig, bound: f64, trial: impl Fn(Instance) -> Result<bool> + Sync) -> Result<BoundReport> {
    let outcomes = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let (inst, discarded) = sample_admissible(cfg, t)?;
            Ok((trial(inst)?, discarded))
        })
        .collect::<Result<Vec<_>>>()?;
    let successes = outcomes.iter().filter(|(ok, _)| *ok).count();
    let resampled = outcomes.iter().map(|(_, d)| d).sum();
    Ok(BoundReport::new(successes, cfg.trials, bound, resampled))
}

/// `1 − (K+1)/√N`.
pub fn no_worse_bound(k: usize, n: usize) -> f64 {
    1.0 - (k as f64 + 1.0) / (n as f64).sqrt()
}

/// Frequency with which the optimal linear stack strictly beats every
/// single output, against `1 − (K+1)/√N`.
pub fn no_worse_frequency(cfg: &TrialConfig) -> Result<BoundReport> {
    cfg.validate_stacking()?;
    run_trials(cfg, no_worse_bound(cfg.k, cfg.n), |inst| inst.stack_improves())
}

/// Frequency with which greedy growth to depth `h` is strict at every
/// stage and ends strictly below every single component, against
/// `(1 − (K+1)/√N)^h`.
pub fn multilayer_bound(cfg: &TrialConfig) -> Result<BoundReport> {
    cfg.validate_stacking()?;
    let bound = no_worse_bound(cfg.k, cfg.n).powi(cfg.h as i32);
    run_trials(cfg, bound, |inst| {
        let data = Dataset::targets_only(inst.targets)?;
        let components = inst
            .outputs
            .into_iter()
            .enumerate()
            .map(|(j, o)| Component::table(format!("f{}", j + 1), o.into_inner()))
            .collect::<Result<Vec<_>>>()?;
        let trace = grow_greedy(&components, cfg.h, &data, cfg.activation)?;
        Ok(trace.all_strict() && trace.final_sse() < trace.best_component_sse - STRICT_TOLERANCE)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_vectors_are_outside_the_band() {
        let u = [1.0, 2.0, -0.5];
        assert!(!angle_in_band(&u, &u, FRAC_PI_2 - 1e-9));
        assert!(angle_in_band(&[1.0, 0.0], &[0.0, 3.0], 0.0));
    }

    #[test]
    fn one_dimension_is_degenerate() {
        let cfg = TrialConfig::new(1, 1, 1, 10, 0);
        assert!(matches!(angle_concentration(&cfg), Err(Error::DegenerateDimension(1))));
    }

    #[test]
    fn width_bound_is_enforced() {
        let cfg = TrialConfig::new(9, 5, 1, 10, 0);
        assert!(matches!(
            no_worse_frequency(&cfg),
            Err(Error::WidthBound { k: 5, n: 9 })
        ));
    }

    #[test]
    fn report_fields_are_consistent() {
        let r = BoundReport::new(3, 4, 0.9, 0);
        assert_eq!(r.empirical_frequency, 0.75);
        assert!((r.ci_halfwidth - 1.96 * (0.75f64 * 0.25 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(r.pass, 0.75 + r.ci_halfwidth >= 0.9);
    }

    #[test]
    fn perfect_component_is_not_admissible() {
        let y = vec![1.0, -1.0, 2.0, 0.5];
        let inst = Instance {
            targets: y.clone(),
            outputs: vec![OutputVector::new(y).unwrap()],
        };
        assert!(!inst.admissible().unwrap());
        assert!(!inst.stack_improves().unwrap());
    }

    #[test]
    fn reports_are_reproducible() {
        let mut cfg = TrialConfig::new(64, 2, 1, 40, 11);
        cfg.distribution = Sampler::Correlated;
        assert_eq!(no_worse_frequency(&cfg).unwrap(), no_worse_frequency(&cfg).unwrap());
        assert_eq!(angle_concentration(&cfg).unwrap(), angle_concentration(&cfg).unwrap());
    }
}
