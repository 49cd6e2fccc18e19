//! Synthetic posteriors, corruption maps and hard-label sampling.
//!
//! Samplers draw instances in fixed-size blocks, each block with its own
//! child seed, so outputs do not depend on the number of worker threads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::logistic::sigmoid;
use crate::error::{Error, Result};
use crate::estimator::{HardLabelCount, HardLabelCounts, SoftLabelSet};
use crate::rng::Seed;

/// Instances per independently seeded block.
pub const BLOCK_SIZE: usize = 4096;

/// Draws `n` items in parallel; item `i` is produced from the stream of block
/// `i / BLOCK_SIZE`, consumed in index order.
pub(crate) fn blockwise<T: Send>(
    n: usize,
    seed: Seed,
    draw: impl Fn(usize, &mut ChaCha8Rng) -> T + Sync,
) -> Vec<T> {
    let blocks = n.div_ceil(BLOCK_SIZE);
    (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = seed.child(b as u64).rng();
            let lo = b * BLOCK_SIZE;
            let hi = (lo + BLOCK_SIZE).min(n);
            (lo..hi).map(|i| draw(i, &mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// Log-odds of `p` in `(0, 1)`, accurate near zero.
fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Two isotropic Gaussians with shared covariance `scale * I`;
/// `theta` is the weight of the positive component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub theta: f64,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub scale: f64,
}

impl GaussianMixtureSpec {
    pub fn new(theta: f64, mu0: Vec<f64>, mu1: Vec<f64>, scale: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::domain(format!("theta = {theta} not in (0, 1)")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain(format!("scale = {scale} must be positive")));
        }
        if mu0.is_empty() || mu0.len() != mu1.len() {
            return Err(Error::domain("component means must share a dimension >= 1"));
        }
        if mu0.iter().chain(&mu1).any(|v| !v.is_finite()) {
            return Err(Error::domain("component means must be finite"));
        }
        Ok(GaussianMixtureSpec {
            theta,
            mu0,
            mu1,
            scale,
        })
    }

    /// `0.6 N((0,0), I) + 0.4 N((2,2), I)`, the standard corruption benchmark.
    pub fn benchmark() -> Self {
        GaussianMixtureSpec::new(0.4, vec![0.0, 0.0], vec![2.0, 2.0], 1.0).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }
}

/// Exact posterior `P(y = 1 | x)` under the mixture, evaluated in log-odds form.
pub fn posterior_gaussian_mixture(x: &[f64], spec: &GaussianMixtureSpec) -> Result<f64> {
    if x.len() != spec.dim() {
        return Err(Error::domain(format!(
            "instance has dimension {}, mixture has {}",
            x.len(),
            spec.dim()
        )));
    }
    Ok(posterior_unchecked(x, spec))
}

fn posterior_unchecked(x: &[f64], spec: &GaussianMixtureSpec) -> f64 {
    let d0: f64 = x.iter().zip(&spec.mu0).map(|(a, b)| (a - b).powi(2)).sum();
    let d1: f64 = x.iter().zip(&spec.mu1).map(|(a, b)| (a - b).powi(2)).sum();
    let log_odds = (spec.theta / (1.0 - spec.theta)).ln() + (d0 - d1) / (2.0 * spec.scale);
    sigmoid(log_odds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSample {
    pub instances: Vec<Vec<f64>>,
    pub posteriors: SoftLabelSet,
}

/// Draws `n` instances from the mixture together with their exact posteriors.
pub fn sample_gaussian_mixture(
    spec: &GaussianMixtureSpec,
    n: usize,
    seed: Seed,
) -> Result<MixtureSample> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let sd = spec.scale.sqrt();
    let rows: Vec<(Vec<f64>, f64)> = blockwise(n, seed, |_, rng| {
        let positive = rng.random::<f64>() < spec.theta;
        let mu = if positive { &spec.mu1 } else { &spec.mu0 };
        let x: Vec<f64> = mu
            .iter()
            .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let eta = posterior_unchecked(&x, spec);
        (x, eta)
    });
    let (instances, etas): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(MixtureSample {
        instances,
        posteriors: SoftLabelSet::new(etas)?,
    })
}

/// Posteriors of the perfectly separated label-flip distribution: each
/// instance has posterior `nu` or `1 - nu` with equal probability.
pub fn label_flip_posteriors(nu: f64, n: usize, seed: Seed) -> Result<SoftLabelSet> {
    if !(0.0..=1.0).contains(&nu) || nu == 0.5 {
        return Err(Error::domain(format!(
            "label flip rate {nu} must be in [0, 1] and differ from 0.5"
        )));
    }
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let etas = blockwise(n, seed, |_, rng| {
        if rng.random::<f64>() < 0.5 {
            nu
        } else {
            1.0 - nu
        }
    });
    SoftLabelSet::new(etas)
}

/// A data distribution described through its posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PosteriorModel {
    GaussianMixture(GaussianMixtureSpec),
    LabelFlip { nu: f64 },
}

impl PosteriorModel {
    /// Named setups: `benchmark` (theta 0.4, means (0,0) and (2,2)), `a`
    /// (theta 0.5, same means), `b` (theta 0.5, coinciding means) and `c`
    /// (label flip with nu = 0.1).
    pub fn preset(name: &str) -> Option<Self> {
        let mix = |theta: f64, mu1: [f64; 2]| {
            PosteriorModel::GaussianMixture(
                GaussianMixtureSpec::new(theta, vec![0.0, 0.0], mu1.to_vec(), 1.0).unwrap(),
            )
        };
        match name {
            "benchmark" => Some(mix(0.4, [2.0, 2.0])),
            "a" => Some(mix(0.5, [2.0, 2.0])),
            "b" => Some(mix(0.5, [0.0, 0.0])),
            "c" => Some(PosteriorModel::LabelFlip { nu: 0.1 }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PosteriorModel::GaussianMixture(spec) => {
                GaussianMixtureSpec::new(spec.theta, spec.mu0.clone(), spec.mu1.clone(), spec.scale)
                    .map(|_| ())
            }
            PosteriorModel::LabelFlip { nu } => label_flip_posteriors(*nu, 1, Seed(0)).map(|_| ()),
        }
    }

    /// Posteriors of `n` instances drawn from the distribution.
    pub fn sample(&self, n: usize, seed: Seed) -> Result<SoftLabelSet> {
        match self {
            PosteriorModel::GaussianMixture(spec) => {
                Ok(sample_gaussian_mixture(spec, n, seed)?.posteriors)
            }
            PosteriorModel::LabelFlip { nu } => label_flip_posteriors(*nu, n, seed),
        }
    }

    /// The Bayes error when it is known in closed form.
    pub fn exact_bayes_error(&self) -> Option<f64> {
        match self {
            PosteriorModel::LabelFlip { nu } => Some(nu.min(1.0 - nu)),
            PosteriorModel::GaussianMixture(_) => None,
        }
    }

    /// `c` such that every posterior lies in `{1/2 - c, 1/2 + c}`, if any.
    pub fn separation(&self) -> Option<f64> {
        match self {
            PosteriorModel::LabelFlip { nu } => Some((0.5 - nu).abs()),
            PosteriorModel::GaussianMixture(_) => None,
        }
    }
}

fn check_beta_params(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain(format!(
            "corruption exponent a = {a} must be positive"
        )));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::domain(format!(
            "corruption midpoint b = {b} not in (0, 1)"
        )));
    }
    Ok(())
}

/// `f(p; a, b) = (1 + ((1 - p)/p)^(1/a) (1 - b)/b)^(-1)`, extended by
/// continuity to `f(0) = 0` and `f(1) = 1`.
pub fn beta_corruption(p: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_params(a, b)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("probability {p} not in [0, 1]")));
    }
    Ok(beta_corruption_unchecked(p, a, b))
}

fn beta_corruption_unchecked(p: f64, a: f64, b: f64) -> f64 {
    corruption_log_odds(p, a, b).map_or(p, sigmoid)
}

/// `logit(f(p; a, b)) = logit(p) / a + logit(b)` for interior `p`; `None` at 0 and 1.
fn corruption_log_odds(p: f64, a: f64, b: f64) -> Option<f64> {
    (p > 0.0 && p < 1.0).then(|| logit(p) / a + logit(b))
}

/// Inverse of [`beta_corruption`]: the two-parameter beta calibration map
/// `q -> (1 + ((1 - q)/q * b/(1 - b))^a)^(-1)`.
pub fn beta_corruption_inverse(q: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_params(a, b)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("probability {q} not in [0, 1]")));
    }
    if q <= 0.0 {
        return Ok(0.0);
    }
    if q >= 1.0 {
        return Ok(1.0);
    }
    Ok(sigmoid(a * (logit(q) - logit(b))))
}

/// Order-preserving (or, with noise, order-breaking) corruption of clean posteriors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CorruptionSpec {
    Identity,
    Beta {
        a: f64,
        b: f64,
    },
    /// `sigmoid(logit(f(eta; a, b)) + z)` with `z ~ N(0, sigma^2)` per instance.
    LogitGaussian {
        a: f64,
        b: f64,
        sigma: f64,
    },
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CorruptionSpec::Identity => Ok(()),
            CorruptionSpec::Beta { a, b } => check_beta_params(a, b),
            CorruptionSpec::LogitGaussian { a, b, sigma } => {
                check_beta_params(a, b)?;
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::domain(format!("sigma = {sigma} must be >= 0")));
                }
                Ok(())
            }
        }
    }

    /// Applies the corruption to every posterior; `seed` drives the noise of
    /// the logit-Gaussian kind and is unused otherwise.
    pub fn apply(&self, etas: &SoftLabelSet, seed: Seed) -> Result<SoftLabelSet> {
        self.validate()?;
        match *self {
            CorruptionSpec::Identity => Ok(etas.clone()),
            CorruptionSpec::Beta { a, b } => SoftLabelSet::new(
                etas.values()
                    .iter()
                    .map(|&p| beta_corruption_unchecked(p, a, b))
                    .collect(),
            ),
            CorruptionSpec::LogitGaussian { a, b, sigma } => {
                logit_gaussian_corruption(etas, a, b, sigma, seed)
            }
        }
    }
}

/// `sigmoid(logit(f(eta; a, b)) + z_i)` with independent `z_i ~ N(0, sigma^2)`.
/// With `sigma = 0` the result equals [`beta_corruption`] exactly.
pub fn logit_gaussian_corruption(
    etas: &SoftLabelSet,
    a: f64,
    b: f64,
    sigma: f64,
    seed: Seed,
) -> Result<SoftLabelSet> {
    check_beta_params(a, b)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma = {sigma} must be >= 0")));
    }
    let v = etas.values();
    let out = blockwise(v.len(), seed, |i, rng| {
        let z: f64 = rng.sample(StandardNormal);
        match corruption_log_odds(v[i], a, b) {
            Some(l) if sigma > 0.0 => sigmoid(l + sigma * z),
            Some(l) => sigmoid(l),
            None => v[i],
        }
    });
    SoftLabelSet::new(out)
}

/// Number of successes in `m` Bernoulli(`p`) trials.
///
/// Exact Bernoulli summation for `m <= 64`, the BTPE sampler beyond.
pub(crate) fn draw_binomial(m: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if m <= 64 {
        (0..m).filter(|_| rng.random::<f64>() < p).count() as u64
    } else {
        Binomial::new(m, p.clamp(0.0, 1.0))
            .expect("probability clamped to [0, 1]")
            .sample(rng)
    }
}

/// `m` hard labels per instance drawn from its posterior.
pub fn sample_hard_labels(etas: &SoftLabelSet, m: u64, seed: Seed) -> Result<HardLabelCounts> {
    if m == 0 {
        return Err(Error::domain("m must be at least 1"));
    }
    let v = etas.values();
    let entries = blockwise(v.len(), seed, |i, rng| HardLabelCount {
        positives: draw_binomial(m, v[i], rng),
        total: m,
    });
    HardLabelCounts::new(entries)
}

/// Single hard label per instance drawn from its posterior.
pub fn sample_single_labels(etas: &SoftLabelSet, seed: Seed) -> Vec<bool> {
    let v = etas.values();
    blockwise(v.len(), seed, |i, rng| rng.random::<f64>() < v[i])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedSample {
    /// Corrupted soft labels: the corrupted posterior itself, or the mean of
    /// `m` hard labels drawn from it.
    pub corrupted: SoftLabelSet,
    /// Corrupted posterior before any hard-label averaging.
    pub corrupted_posterior: SoftLabelSet,
    /// One hard label per instance from the true posterior.
    pub labels: Vec<bool>,
}

/// Corrupts `etas`, optionally replaces the corrupted posteriors with the
/// average of `m` hard labels drawn from them, and draws one true-posterior
/// label per instance for calibration. The three random streams use child
/// seeds 0 (corruption noise), 1 (corrupted hard labels) and 2 (true labels).
pub fn corrupted_hard_label_pipeline(
    etas: &SoftLabelSet,
    corruption: &CorruptionSpec,
    m: Option<u64>,
    seed: Seed,
) -> Result<CorruptedSample> {
    let corrupted_posterior = corruption.apply(etas, seed.child(0))?;
    let corrupted = match m {
        None => corrupted_posterior.clone(),
        Some(m) => {
            let counts = sample_hard_labels(&corrupted_posterior, m, seed.child(1))?;
            crate::estimator::soft_from_hard(&counts)?
        }
    };
    let labels = sample_single_labels(etas, seed.child(2));
    Ok(CorruptedSample {
        corrupted,
        corrupted_posterior,
        labels,
    })
}
