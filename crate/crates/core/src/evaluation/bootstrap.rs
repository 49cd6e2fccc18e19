//! Nonparametric bootstrap confidence intervals (percentile and BCa).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::calibration::{PairedDataset, PairedEstimator};
use crate::error::{Error, Result};
use crate::estimator::{
    mean_phi_err, soft_from_hard, ConfidenceInterval, HardLabelCounts, SoftLabelSet,
};
use crate::rng::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Percentile,
    Bca,
}

impl std::str::FromStr for CiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "percentile" => Ok(CiMethod::Percentile),
            "bca" => Ok(CiMethod::Bca),
            _ => Err(Error::domain(format!("unknown interval method '{s}'"))),
        }
    }
}

impl CiMethod {
    pub fn name(self) -> &'static str {
        match self {
            CiMethod::Percentile => "percentile",
            CiMethod::Bca => "bca",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub resamples: usize,
    pub level: f64,
    pub method: CiMethod,
    pub seed: Seed,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            resamples: 1000,
            level: 0.95,
            method: CiMethod::Bca,
            seed: Seed(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub lower: f64,
    pub upper: f64,
    pub point: f64,
    pub level: f64,
    /// Requested method.
    pub method: CiMethod,
    pub resamples: usize,
    pub seed: u64,
    /// BCa was requested but the bias correction was undefined.
    pub fallback_to_percentile: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias_correction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceleration: Option<f64>,
}

/// Type-7 quantile of sorted data (linear interpolation between order statistics).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Above this many items the BCa acceleration uses a delete-a-group
/// jackknife: item `i` belongs to group `i % JACKKNIFE_GROUPS`. The
/// acceleration formula is invariant to the grouping scale, so the estimate
/// stays consistent while the number of refits is bounded.
pub const JACKKNIFE_GROUPS: usize = 1000;

/// Draws `n` indices with replacement and returns them in ascending order.
fn resample_indices(n: usize, seed: Seed) -> Vec<usize> {
    let mut rng = seed.rng();
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    let mut out = Vec::with_capacity(n);
    for (i, &c) in counts.iter().enumerate() {
        out.extend(std::iter::repeat_n(i, c as usize));
    }
    out
}

/// Bootstrap interval for `statistic` evaluated on index multisets of a
/// collection of `n` items.
///
/// Resample `b` uses child seed `b` of `opts.seed`. Indices are handed to the
/// statistic in ascending order, which suits the permutation-invariant
/// statistics used in this crate. BCa uses the leave-one-out jackknife for the
/// acceleration constant, grouped once `n` exceeds [`JACKKNIFE_GROUPS`].
pub fn bootstrap_ci<F>(n: usize, statistic: F, opts: &BootstrapOptions) -> Result<BootstrapCi>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if n < 2 {
        return Err(Error::domain("bootstrap needs at least two items"));
    }
    if opts.resamples < 100 {
        return Err(Error::domain(format!(
            "bootstrap needs at least 100 resamples, got {}",
            opts.resamples
        )));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::domain(format!("level {} not in (0, 1)", opts.level)));
    }

    let all: Vec<usize> = (0..n).collect();
    let point = statistic(&all)?;
    let mut replicates: Vec<f64> = (0..opts.resamples)
        .into_par_iter()
        .map(|b| {
            let idx = resample_indices(n, opts.seed.child(b as u64));
            statistic(&idx).map_err(|e| Error::Numeric(format!("bootstrap resample {b}: {e}")))
        })
        .collect::<Result<_>>()?;
    replicates.sort_by(f64::total_cmp);

    let alpha = 1.0 - opts.level;
    let percentile = |lo_p: f64, hi_p: f64| {
        (
            quantile_sorted(&replicates, lo_p),
            quantile_sorted(&replicates, hi_p),
        )
    };
    let mut ci = BootstrapCi {
        lower: 0.0,
        upper: 0.0,
        point,
        level: opts.level,
        method: opts.method,
        resamples: opts.resamples,
        seed: opts.seed.0,
        fallback_to_percentile: false,
        bias_correction: None,
        acceleration: None,
    };

    let bca = match opts.method {
        CiMethod::Percentile => None,
        CiMethod::Bca => bca_levels(&replicates, point, alpha, n, &statistic)?,
    };
    let (lo, hi) = match bca {
        Some((p_lo, p_hi, z0, acc)) => {
            ci.bias_correction = Some(z0);
            ci.acceleration = Some(acc);
            percentile(p_lo, p_hi)
        }
        None => {
            ci.fallback_to_percentile = opts.method == CiMethod::Bca;
            percentile(alpha / 2.0, 1.0 - alpha / 2.0)
        }
    };
    ci.lower = lo;
    ci.upper = hi;
    Ok(ci)
}

impl From<&BootstrapCi> for ConfidenceInterval {
    fn from(ci: &BootstrapCi) -> Self {
        ConfidenceInterval {
            lower: ci.lower,
            upper: ci.upper,
            level: ci.level,
            method: ci.method.name().to_string(),
            resamples: ci.resamples,
            seed: ci.seed,
            fallback_to_percentile: ci.fallback_to_percentile,
            excludes_point_estimate: !(ci.lower <= ci.point && ci.point <= ci.upper),
        }
    }
}

/// Interval for the plug-in estimate on soft labels.
pub fn bootstrap_soft(labels: &SoftLabelSet, opts: &BootstrapOptions) -> Result<BootstrapCi> {
    let v = labels.values();
    bootstrap_ci(
        v.len(),
        |idx| Ok(mean_phi_err(&idx.iter().map(|&i| v[i]).collect::<Vec<_>>())),
        opts,
    )
}

/// Interval for the hard-label averaging estimate.
pub fn bootstrap_hard(counts: &HardLabelCounts, opts: &BootstrapOptions) -> Result<BootstrapCi> {
    let soft = soft_from_hard(counts)?;
    bootstrap_soft(&soft, opts)
}

/// Interval for a paired estimator; rows are resampled jointly and the
/// calibration map is refitted on every resample.
pub fn bootstrap_paired(
    data: &PairedDataset,
    estimator: PairedEstimator,
    opts: &BootstrapOptions,
) -> Result<BootstrapCi> {
    // Presorting keeps every index multiset (ascending) in score order,
    // which makes the per-resample sort linear.
    let sorted = data.select(&data.sorted_order())?;
    bootstrap_ci(
        sorted.len(),
        |idx| estimator.estimate(&sorted.select(idx)?),
        opts,
    )
}

/// Adjusted percentile levels, or `None` when the bias correction is undefined.
fn bca_levels<F>(
    sorted: &[f64],
    point: f64,
    alpha: f64,
    n: usize,
    statistic: &F,
) -> Result<Option<(f64, f64, f64, f64)>>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    let std_normal = Normal::standard();
    let below = sorted.iter().filter(|&&t| t < point).count();
    let frac = below as f64 / sorted.len() as f64;
    if frac <= 0.0 || frac >= 1.0 {
        return Ok(None);
    }
    let z0 = std_normal.inverse_cdf(frac);

    let groups = n.min(JACKKNIFE_GROUPS);
    let jack: Vec<f64> = (0..groups)
        .into_par_iter()
        .map(|skip| {
            let idx: Vec<usize> = (0..n).filter(|&i| i % groups != skip).collect();
            statistic(&idx).map_err(|e| Error::Numeric(format!("jackknife group {skip}: {e}")))
        })
        .collect::<Result<_>>()?;
    let mean = jack.iter().sum::<f64>() / groups as f64;
    let (num, den) = jack.iter().fold((0.0, 0.0), |(num, den), &t| {
        let d = mean - t;
        (num + d * d * d, den + d * d)
    });
    let acc = if den > 0.0 {
        num / (6.0 * den.powf(1.5))
    } else {
        0.0
    };

    let adjust = |z: f64| {
        let s = z0 + z;
        std_normal.cdf(z0 + s / (1.0 - acc * s))
    };
    let p_lo = adjust(std_normal.inverse_cdf(alpha / 2.0));
    let p_hi = adjust(std_normal.inverse_cdf(1.0 - alpha / 2.0));
    if !(p_lo.is_finite() && p_hi.is_finite()) {
        return Ok(None);
    }
    Ok(Some((p_lo, p_hi, z0, acc)))
}
