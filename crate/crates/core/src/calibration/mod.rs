//! Calibration of corrupted soft labels against single hard labels.
//!
//! Every calibrator is fitted on `(score, label)` pairs and produces a
//! nondecreasing map from scores to probabilities. The calibrated scores of
//! the training points are then fed to the plug-in Bayes error estimator.

mod histogram;
mod isotonic;
pub mod logistic;
mod model;
mod parametric;
pub mod pav;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use histogram::histogram_fit;
pub use isotonic::isotonic_fit;
pub use logistic::{logistic_fit, LogisticFit, LogisticOptions};
pub use model::{flags, CalibrationMap, CalibratorModel, FitInfo};
pub use parametric::{beta_fit, platt_fit};
pub use pav::{minmax_oracle, pav_blocks, pav_fit, pav_fit_unweighted, Block};

use crate::error::{Error, Result};
use crate::estimator::{mean_phi_err, EstimateReport};

/// Clip used before log and logit transforms.
pub const PROBABILITY_EPSILON: f64 = 1e-12;

pub(crate) fn clip_probability(p: f64) -> f64 {
    p.clamp(PROBABILITY_EPSILON, 1.0 - PROBABILITY_EPSILON)
}

/// `(score, hard label)` pairs; scores in `[0, 1]`, at least two pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl PairedDataset {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::domain(format!(
                "paired dataset: {} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.len() < 2 {
            return Err(Error::domain("paired dataset needs at least two pairs"));
        }
        if let Some((i, s)) = scores
            .iter()
            .enumerate()
            .find(|(_, s)| !(0.0..=1.0).contains(*s))
        {
            return Err(Error::domain(format!(
                "score at index {i} is {s}, expected a value in [0, 1]"
            )));
        }
        Ok(PairedDataset { scores, labels })
    }

    pub fn from_pairs(pairs: &[(f64, u8)]) -> Result<Self> {
        if let Some((_, y)) = pairs.iter().find(|(_, y)| *y > 1) {
            return Err(Error::domain(format!("label {y} is not binary")));
        }
        PairedDataset::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1 == 1).collect(),
        )
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// True when every label is the same class.
    pub fn is_single_class(&self) -> bool {
        self.labels.iter().all(|&y| y == self.labels[0])
    }

    pub fn with_labels(&self, labels: Vec<bool>) -> Result<Self> {
        PairedDataset::new(self.scores.clone(), labels)
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        PairedDataset::new(
            indices.iter().map(|&i| self.scores[i]).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Indices ordered by ascending score; ties keep input order.
    pub(crate) fn sorted_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]));
        order
    }

    pub(crate) fn distinct_scores(&self) -> usize {
        let mut s = self.scores.clone();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaVariant {
    /// `a`, `b`, `c` all free.
    Beta,
    /// `b = a`.
    BetaAm,
    /// Midpoint fixed at one half.
    BetaAb,
    /// `b = a` and midpoint fixed at one half.
    BetaA,
}

impl BetaVariant {
    pub fn name(self) -> &'static str {
        match self {
            BetaVariant::Beta => "beta",
            BetaVariant::BetaAm => "beta-am",
            BetaVariant::BetaAb => "beta-ab",
            BetaVariant::BetaA => "beta-a",
        }
    }
}

impl FromStr for BetaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(BetaVariant::Beta),
            "beta-am" => Ok(BetaVariant::BetaAm),
            "beta-ab" => Ok(BetaVariant::BetaAb),
            "beta-a" => Ok(BetaVariant::BetaA),
            _ => Err(Error::domain(format!("unknown beta variant '{s}'"))),
        }
    }
}

/// A calibration family together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CalibrationMethod {
    Isotonic,
    Histogram { bins: usize },
    Beta(BetaVariant),
    Platt { target_smoothing: bool },
}

impl CalibrationMethod {
    pub fn fit(&self, data: &PairedDataset) -> Result<CalibratorModel> {
        match *self {
            CalibrationMethod::Isotonic => isotonic_fit(data),
            CalibrationMethod::Histogram { bins } => histogram_fit(data, bins),
            CalibrationMethod::Beta(v) => beta_fit(data, v),
            CalibrationMethod::Platt { target_smoothing } => platt_fit(data, target_smoothing),
        }
    }
}

impl fmt::Display for CalibrationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibrationMethod::Isotonic => f.write_str("isotonic"),
            CalibrationMethod::Histogram { bins } => write!(f, "hist-{bins}"),
            CalibrationMethod::Beta(v) => f.write_str(v.name()),
            CalibrationMethod::Platt {
                target_smoothing: false,
            } => f.write_str("platt"),
            CalibrationMethod::Platt {
                target_smoothing: true,
            } => f.write_str("platt-smoothed"),
        }
    }
}

impl FromStr for CalibrationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotonic" => Ok(CalibrationMethod::Isotonic),
            "platt" => Ok(CalibrationMethod::Platt {
                target_smoothing: false,
            }),
            "platt-smoothed" => Ok(CalibrationMethod::Platt {
                target_smoothing: true,
            }),
            _ => {
                if let Some(bins) = s.strip_prefix("hist-") {
                    let bins = bins
                        .parse()
                        .ok()
                        .filter(|&b: &usize| b >= 1)
                        .ok_or_else(|| Error::domain(format!("bad bin count in '{s}'")))?;
                    Ok(CalibrationMethod::Histogram { bins })
                } else {
                    s.parse()
                        .map(CalibrationMethod::Beta)
                        .map_err(|_| Error::domain(format!("unknown calibration method '{s}'")))
                }
            }
        }
    }
}

/// Bayes error estimators that consume a paired dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairedEstimator {
    /// Plug-in estimate on the raw scores; hard labels are ignored.
    Corrupted,
    Calibrated(CalibrationMethod),
}

impl PairedEstimator {
    pub fn estimate(&self, data: &PairedDataset) -> Result<f64> {
        match self {
            PairedEstimator::Corrupted => Ok(mean_phi_err(data.scores())),
            PairedEstimator::Calibrated(method) => {
                let model = method.fit(data)?;
                Ok(mean_phi_err(&model.apply(data.scores())))
            }
        }
    }
}

impl fmt::Display for PairedEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairedEstimator::Corrupted => f.write_str("corrupted"),
            PairedEstimator::Calibrated(m) => m.fmt(f),
        }
    }
}

impl FromStr for PairedEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrupted" | "none" => Ok(PairedEstimator::Corrupted),
            _ => s.parse().map(PairedEstimator::Calibrated),
        }
    }
}

/// Fits `method` on `data`, calibrates the training scores themselves and
/// returns the plug-in estimate on the calibrated values.
pub fn calibrate_and_estimate(
    data: &PairedDataset,
    method: CalibrationMethod,
) -> Result<(EstimateReport, CalibratorModel)> {
    let model = method.fit(data)?;
    let estimate = mean_phi_err(&model.apply(data.scores()));
    let mut report = EstimateReport::new(method.to_string(), data.len(), estimate);
    report
        .parameters
        .insert("family".into(), model.family().into());
    if !model.flags.is_empty() {
        report
            .parameters
            .insert("flags".into(), serde_json::to_value(&model.flags)?);
    }
    Ok((report, model))
}
