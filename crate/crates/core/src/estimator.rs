//! Plug-in Bayes error estimators over soft labels.
//!
//! A soft label is the posterior probability `P(y = 1 | x)` of a single
//! instance. The same container holds clean posteriors, averages of hard
//! labels, corrupted scores and calibrated scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-instance probabilities, each in `[0, 1]`, at least one entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SoftLabelSet(Vec<f64>);

impl SoftLabelSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("soft label set must be non-empty"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::domain(format!(
                "soft label at index {i} is {v}, expected a value in [0, 1]"
            )));
        }
        Ok(SoftLabelSet(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Selects entries by index, repeating indices as given.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        SoftLabelSet::new(indices.iter().map(|&i| self.0[i]).collect())
    }
}

impl TryFrom<Vec<f64>> for SoftLabelSet {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        SoftLabelSet::new(values)
    }
}

impl From<SoftLabelSet> for Vec<f64> {
    fn from(set: SoftLabelSet) -> Self {
        set.0
    }
}

/// Summary of `total` Bernoulli draws per instance, `positives` of which were 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardLabelCount {
    pub positives: u64,
    pub total: u64,
}

/// Hard-label counts for a set of instances. Totals may differ per instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardLabelCounts(Vec<HardLabelCount>);

impl HardLabelCounts {
    pub fn new(entries: Vec<HardLabelCount>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if e.total == 0 {
                return Err(Error::domain(format!("instance {i} has zero hard labels")));
            }
            if e.positives > e.total {
                return Err(Error::domain(format!(
                    "instance {i} has {} positives out of {} labels",
                    e.positives, e.total
                )));
            }
        }
        Ok(HardLabelCounts(entries))
    }

    pub fn from_pairs(pairs: &[(u64, u64)]) -> Result<Self> {
        HardLabelCounts::new(
            pairs
                .iter()
                .map(|&(positives, total)| HardLabelCount { positives, total })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[HardLabelCount] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        HardLabelCounts(indices.iter().map(|&i| self.0[i]).collect())
    }
}

/// Confidence interval attached to an [`EstimateReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: String,
    pub resamples: usize,
    pub seed: u64,
    /// Set when BCa was requested but fell back to the percentile interval.
    pub fallback_to_percentile: bool,
    /// Set when the interval does not contain the point estimate.
    pub excludes_point_estimate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: String,
    pub n: usize,
    pub point_estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci: Option<ConfidenceInterval>,
    #[serde(default)]
    pub parameters: BTreeMap<String, serde_json::Value>,
}

impl EstimateReport {
    pub fn new(method: impl Into<String>, n: usize, point_estimate: f64) -> Self {
        EstimateReport {
            method: method.into(),
            n,
            point_estimate,
            ci: None,
            parameters: BTreeMap::new(),
        }
    }
}

/// `min(q, 1 - q)`, the conditional error of the Bayes classifier at posterior `q`.
pub fn phi_err(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("phi_err: {q} is outside [0, 1]")));
    }
    Ok(q.min(1.0 - q))
}

/// Kahan-compensated sum, accumulated in input order.
pub(crate) fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Mean of `min(η, 1 - η)` over the label set.
pub fn estimate_bayes_error(labels: &SoftLabelSet) -> f64 {
    mean_phi_err(labels.values())
}

/// Same as [`estimate_bayes_error`] for a raw slice, which must already be
/// validated to lie in `[0, 1]`.
pub(crate) fn mean_phi_err(values: &[f64]) -> f64 {
    let total = kahan_sum(values.iter().map(|&v| v.min(1.0 - v)));
    (total / values.len() as f64).clamp(0.0, 0.5)
}

/// Averages hard labels into approximate soft labels `k / m`.
pub fn soft_from_hard(counts: &HardLabelCounts) -> Result<SoftLabelSet> {
    SoftLabelSet::new(
        counts
            .entries()
            .iter()
            .map(|e| e.positives as f64 / e.total as f64)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn soft(v: &[f64]) -> SoftLabelSet {
        SoftLabelSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn phi_err_examples() {
        assert_eq!(phi_err(0.0).unwrap(), 0.0);
        assert_eq!(phi_err(0.5).unwrap(), 0.5);
        assert_abs_diff_eq!(phi_err(0.9).unwrap(), 0.1, epsilon = 1e-15);
        assert!(phi_err(1.5).is_err());
        assert!(phi_err(-0.1).is_err());
        assert!(phi_err(f64::NAN).is_err());
    }

    #[test]
    fn estimate_examples() {
        assert_eq!(estimate_bayes_error(&soft(&[0.0, 1.0, 0.0, 1.0])), 0.0);
        assert_eq!(estimate_bayes_error(&soft(&[0.5, 0.5])), 0.5);
        assert_abs_diff_eq!(
            estimate_bayes_error(&soft(&[0.2, 0.9, 0.4])),
            (0.2 + 0.1 + 0.4) / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn empty_and_out_of_range_rejected() {
        assert!(SoftLabelSet::new(vec![]).is_err());
        assert!(SoftLabelSet::new(vec![0.2, 1.01]).is_err());
        assert!(SoftLabelSet::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn soft_from_hard_examples() {
        let s = soft_from_hard(&HardLabelCounts::from_pairs(&[(25, 50)]).unwrap()).unwrap();
        assert_eq!(s.values(), &[0.5]);
        let s =
            soft_from_hard(&HardLabelCounts::from_pairs(&[(0, 10), (10, 10)]).unwrap()).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0]);
        let s = soft_from_hard(&HardLabelCounts::from_pairs(&[(3, 7)]).unwrap()).unwrap();
        assert_eq!(s.values(), &[3.0 / 7.0]);
        // uneven totals are allowed
        let s =
            soft_from_hard(&HardLabelCounts::from_pairs(&[(10, 47), (60, 63)]).unwrap()).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn invalid_counts_rejected() {
        assert!(HardLabelCounts::from_pairs(&[(0, 0)]).is_err());
        assert!(HardLabelCounts::from_pairs(&[(5, 4)]).is_err());
    }

    #[test]
    fn kahan_matches_exact_small_sums() {
        let v = vec![0.1; 10];
        assert_abs_diff_eq!(kahan_sum(v), 1.0, epsilon = 1e-15);
    }
}
