use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{PairedDataset, PairedEstimator};
use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::synthdata::blockwise;

/// Replaces each label, with probability `rho`, by a fair coin flip.
pub fn inject_label_noise(labels: &[bool], rho: f64, seed: Seed) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain(format!("rho = {rho} not in [0, 1]")));
    }
    Ok(blockwise(labels.len(), seed, |i, rng| {
        let replace = rng.random::<f64>() < rho;
        let coin = rng.random::<bool>();
        if replace {
            coin
        } else {
            labels[i]
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeeBeeReport {
    pub method: String,
    pub rho_grid: Vec<f64>,
    pub estimates: Vec<f64>,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
    pub penalties: Vec<f64>,
    pub score: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "N")]
    pub n_grid: usize,
    pub seed: u64,
}

/// `(L, U)` for noise level `rho` and Bayes-error upper bound `e`.
pub fn feebee_bounds(rho: f64, e: f64) -> (f64, f64) {
    (rho / 2.0, rho / 2.0 + (1.0 - rho) * e)
}

pub fn feebee_penalty(estimate: f64, lower: f64, upper: f64) -> f64 {
    (estimate - upper).max(0.0) + (lower - estimate).max(0.0)
}

/// Scores an arbitrary estimator over the grid `rho_i = i / N`.
///
/// Point `i` sees labels noised with child seed `i` of `seed`.
pub fn feebee_score_with<F>(
    data: &PairedDataset,
    e: f64,
    n_grid: usize,
    seed: Seed,
    name: &str,
    estimator: F,
) -> Result<FeeBeeReport>
where
    F: Fn(&PairedDataset) -> Result<f64> + Sync,
{
    if !(e > 0.0 && e <= 0.5) {
        return Err(Error::domain(format!("E = {e} not in (0, 0.5]")));
    }
    if n_grid < 1 {
        return Err(Error::domain("N must be at least 1"));
    }
    let rho_grid: Vec<f64> = (0..=n_grid).map(|i| i as f64 / n_grid as f64).collect();
    let estimates: Vec<f64> = rho_grid
        .par_iter()
        .enumerate()
        .map(|(i, &rho)| {
            let labels = inject_label_noise(data.labels(), rho, seed.child(i as u64))?;
            let noised = data.with_labels(labels)?;
            estimator(&noised).map_err(|err| match err {
                Error::Fit(msg) => Error::Fit(format!("{name} at rho = {rho}: {msg}")),
                Error::Numeric(msg) => Error::Numeric(format!("{name} at rho = {rho}: {msg}")),
                other => other,
            })
        })
        .collect::<Result<_>>()?;

    let (lower_bounds, upper_bounds): (Vec<f64>, Vec<f64>) =
        rho_grid.iter().map(|&rho| feebee_bounds(rho, e)).unzip();
    let penalties: Vec<f64> = estimates
        .iter()
        .zip(lower_bounds.iter().zip(&upper_bounds))
        .map(|(&est, (&lo, &hi))| feebee_penalty(est, lo, hi))
        .collect();
    let score = penalties.iter().sum::<f64>() / penalties.len() as f64;
    Ok(FeeBeeReport {
        method: name.to_string(),
        rho_grid,
        estimates,
        lower_bounds,
        upper_bounds,
        penalties,
        score,
        e,
        n_grid,
        seed: seed.0,
    })
}

pub fn feebee_score(
    data: &PairedDataset,
    estimator: PairedEstimator,
    e: f64,
    n_grid: usize,
    seed: Seed,
) -> Result<FeeBeeReport> {
    feebee_score_with(data, e, n_grid, seed, &estimator.to_string(), |d| {
        estimator.estimate(d)
    })
}
