//! Command implementations, usable without going through argument parsing.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bias_bound_separated, bias_bound_thm21};
use crate::calibration::{
    calibrate_and_estimate, CalibrationMethod, PairedDataset, PairedEstimator,
};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_bayes_error, soft_from_hard, EstimateReport, HardLabelCounts, SoftLabelSet,
};
use crate::evaluation::{
    bootstrap_hard, bootstrap_paired, bootstrap_soft, feebee_score, fit_loglog_slope, kendall_tau,
    order_break_probability, BootstrapOptions, FeeBeeReport, SlopeFit,
};
use crate::rng::Seed;
use crate::synthdata::{
    corrupted_hard_label_pipeline, sample_hard_labels, CorruptionSpec, PosteriorModel,
};

use super::io::Dataset;

/// Estimation methods accepted by `estimate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    /// Plug-in estimate on the soft labels as given.
    Clean,
    /// Averaged hard labels.
    Hard,
    /// Plug-in estimate on corrupted soft labels, without correction.
    Corrupted,
    Calibrated(CalibrationMethod),
}

impl fmt::Display for EstimateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimateMethod::Clean => f.write_str("clean"),
            EstimateMethod::Hard => f.write_str("hard"),
            EstimateMethod::Corrupted => f.write_str("corrupted"),
            EstimateMethod::Calibrated(m) => m.fmt(f),
        }
    }
}

impl FromStr for EstimateMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(EstimateMethod::Clean),
            "hard" => Ok(EstimateMethod::Hard),
            "corrupted" | "none" => Ok(EstimateMethod::Corrupted),
            _ => s.parse().map(EstimateMethod::Calibrated).map_err(|_| {
                Error::Usage(format!(
                    "unknown method '{s}'; expected clean, hard, corrupted, isotonic, hist, hist-<B>, \
                     beta, beta-am, beta-ab, beta-a, platt or platt-smoothed"
                ))
            }),
        }
    }
}

fn mismatch(method: EstimateMethod, data: &Dataset, wanted: &str) -> Error {
    Error::Usage(format!(
        "method {method} needs a {wanted} file, got format {}",
        data.format().name()
    ))
}

/// Runs one estimation method on a dataset, with an optional bootstrap interval.
pub fn estimate_with(
    data: &Dataset,
    method: EstimateMethod,
    ci: Option<&BootstrapOptions>,
) -> Result<EstimateReport> {
    let mut report = match (method, data) {
        (EstimateMethod::Clean | EstimateMethod::Corrupted, Dataset::Soft(s)) => {
            let mut r = EstimateReport::new(method.to_string(), s.len(), estimate_bayes_error(s));
            if let Some(opts) = ci {
                r.ci = Some((&bootstrap_soft(s, opts)?).into());
            }
            r
        }
        (EstimateMethod::Clean | EstimateMethod::Corrupted, Dataset::Paired(p)) => {
            let mut r = EstimateReport::new(
                method.to_string(),
                p.len(),
                PairedEstimator::Corrupted.estimate(p)?,
            );
            r.parameters.insert("column".into(), "eta_tilde".into());
            if let Some(opts) = ci {
                r.ci = Some((&bootstrap_paired(p, PairedEstimator::Corrupted, opts)?).into());
            }
            r
        }
        (EstimateMethod::Clean | EstimateMethod::Corrupted, _) => {
            return Err(mismatch(method, data, "soft or paired"))
        }
        (EstimateMethod::Hard, Dataset::Counts(c)) => {
            let soft = soft_from_hard(c)?;
            let mut r = EstimateReport::new("hard", c.len(), estimate_bayes_error(&soft));
            if let Some(opts) = ci {
                r.ci = Some((&bootstrap_hard(c, opts)?).into());
            }
            r
        }
        (EstimateMethod::Hard, _) => return Err(mismatch(method, data, "counts")),
        (EstimateMethod::Calibrated(m), Dataset::Paired(p)) => {
            let (mut r, _) = calibrate_and_estimate(p, m)?;
            if let Some(opts) = ci {
                r.ci = Some((&bootstrap_paired(p, PairedEstimator::Calibrated(m), opts)?).into());
            }
            r
        }
        (EstimateMethod::Calibrated(_), _) => return Err(mismatch(method, data, "paired")),
    };
    if let Some(opts) = ci {
        report
            .parameters
            .insert("bootstrap_seed".into(), opts.seed.0.into());
    }
    Ok(report)
}

/// In-memory output of `gen`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub soft: SoftLabelSet,
    pub counts: Option<HardLabelCounts>,
    pub paired: Option<PairedDataset>,
}

/// Draws clean posteriors (child seed 0), optional clean hard-label counts
/// (child seed 1) and an optional corrupted paired dataset (child seed 2).
///
/// The paired scores are the corrupted posteriors, or the mean of `m` hard
/// labels drawn from them when `m` is given; the paired labels are single
/// draws from the clean posteriors.
pub fn generate(
    model: &PosteriorModel,
    n: usize,
    m: Option<u64>,
    corruption: Option<&CorruptionSpec>,
    seed: Seed,
) -> Result<GeneratedData> {
    let soft = model.sample(n, seed.child(0))?;
    let counts = m
        .map(|m| sample_hard_labels(&soft, m, seed.child(1)))
        .transpose()?;
    let paired = match corruption {
        Some(spec) => {
            let s = corrupted_hard_label_pipeline(&soft, spec, m, seed.child(2))?;
            Some(PairedDataset::new(s.corrupted.into_inner(), s.labels)?)
        }
        None => None,
    };
    Ok(GeneratedData {
        soft,
        counts,
        paired,
    })
}

/// Plot-ready series with an uncertainty band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y_lo: Vec<f64>,
    pub y_hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub m: u64,
    pub mean_estimate: f64,
    pub mean_clean_estimate: f64,
    /// `mean_estimate - mean_clean_estimate`.
    pub signed_bias: f64,
    pub bias: f64,
    /// Standard error of the per-repeat differences.
    pub stderr: f64,
    pub thm21_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separated_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSimulation {
    pub distribution: PosteriorModel,
    pub n: usize,
    pub repeats: usize,
    pub seed: u64,
    pub bound_sample_size: usize,
    pub rows: Vec<BiasRow>,
    /// `None` when some bias is exactly zero.
    pub slope: Option<SlopeFit>,
    pub plot: PlotSeries,
}

/// Instances used to evaluate the sample-average bias bound.
pub const BOUND_SAMPLE_SIZE: usize = 20_000;

/// Monte Carlo bias of the hard-label averaging estimator.
///
/// Repeat `r` draws posteriors from child seed `(r, 0)` and, for the `j`-th
/// value of `m`, hard labels from child seed `(r, j + 1)`. The bias at `m` is
/// the mean over repeats of the estimate minus the clean estimate of the same
/// posteriors.
pub fn simulate_bias(
    model: &PosteriorModel,
    m_values: &[u64],
    n: usize,
    repeats: usize,
    seed: Seed,
) -> Result<BiasSimulation> {
    if repeats < 2 {
        return Err(Error::Usage("simulate-bias needs --repeats >= 2".into()));
    }
    if m_values.is_empty() || m_values.contains(&0) {
        return Err(Error::Usage("--m-list needs positive values".into()));
    }
    model.validate()?;
    let per_repeat: Vec<Vec<(f64, f64)>> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let rs = seed.child(r as u64);
            let etas = model.sample(n, rs.child(0))?;
            let clean = estimate_bayes_error(&etas);
            m_values
                .iter()
                .enumerate()
                .map(|(j, &m)| {
                    let counts = sample_hard_labels(&etas, m, rs.child(j as u64 + 1))?;
                    Ok((estimate_bayes_error(&soft_from_hard(&counts)?), clean))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let bound_sample = model.sample(BOUND_SAMPLE_SIZE, seed.child(u64::MAX))?;
    let k = repeats as f64;
    let rows: Vec<BiasRow> = m_values
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let est: Vec<f64> = per_repeat.iter().map(|r| r[j].0).collect();
            let clean: Vec<f64> = per_repeat.iter().map(|r| r[j].1).collect();
            let diffs: Vec<f64> = est.iter().zip(&clean).map(|(a, b)| a - b).collect();
            let mean_diff = diffs.iter().sum::<f64>() / k;
            let var = diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (k - 1.0);
            Ok(BiasRow {
                m,
                mean_estimate: est.iter().sum::<f64>() / k,
                mean_clean_estimate: clean.iter().sum::<f64>() / k,
                signed_bias: mean_diff,
                bias: mean_diff.abs(),
                stderr: (var / k).sqrt(),
                thm21_bound: bias_bound_thm21(&bound_sample, m)?,
                separated_bound: model
                    .separation()
                    .filter(|&c| c > 0.0)
                    .map(|c| bias_bound_separated(c, m))
                    .transpose()?,
            })
        })
        .collect::<Result<_>>()?;

    let biases: Vec<f64> = rows.iter().map(|r| r.bias).collect();
    let slope = if m_values.len() >= 2 && biases.iter().all(|&b| b > 0.0) {
        Some(fit_loglog_slope(m_values, &biases)?)
    } else {
        None
    };
    let plot = PlotSeries {
        x: m_values.iter().map(|&m| m as f64).collect(),
        y: biases.clone(),
        y_lo: rows
            .iter()
            .map(|r| (r.bias - 1.96 * r.stderr).max(0.0))
            .collect(),
        y_hi: rows.iter().map(|r| r.bias + 1.96 * r.stderr).collect(),
    };
    Ok(BiasSimulation {
        distribution: model.clone(),
        n,
        repeats,
        seed: seed.0,
        bound_sample_size: BOUND_SAMPLE_SIZE,
        rows,
        slope,
        plot,
    })
}

/// FeeBee reports for several estimators, sorted by ascending score.
///
/// Every estimator sees the same noise realizations.
pub fn feebee_table(
    data: &PairedDataset,
    methods: &[PairedEstimator],
    e: f64,
    n_grid: usize,
    seed: Seed,
) -> Result<Vec<FeeBeeReport>> {
    if methods.is_empty() {
        return Err(Error::Usage("feebee needs at least one method".into()));
    }
    let mut reports = methods
        .iter()
        .map(|&m| feebee_score(data, m, e, n_grid, seed))
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| a.score.total_cmp(&b.score));
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderBreakRow {
    pub sigma: f64,
    pub tau: f64,
    pub order_break_probability: f64,
    pub estimates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderBreakSweep {
    pub distribution: PosteriorModel,
    pub a: f64,
    pub b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    pub n: usize,
    pub seed: u64,
    pub clean_estimate: f64,
    pub rows: Vec<OrderBreakRow>,
    /// Estimate against tau, one series per method.
    pub plots: BTreeMap<String, PlotSeries>,
}

/// Sweeps the logit-noise level of the corruption and records rank agreement
/// with the clean posteriors next to each method's estimate.
///
/// Posteriors come from child seed 0. Every sigma reuses child seed 1 for the
/// corruption pipeline, so the noise draws are shared and only their scale
/// changes along the sweep.
#[allow(clippy::too_many_arguments)]
pub fn order_break_sweep(
    model: &PosteriorModel,
    sigmas: &[f64],
    a: f64,
    b: f64,
    m: Option<u64>,
    n: usize,
    methods: &[PairedEstimator],
    seed: Seed,
) -> Result<OrderBreakSweep> {
    if let Some(s) = sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::Usage(format!("sigma {s} must be >= 0")));
    }
    if methods.is_empty() {
        return Err(Error::Usage("order-break needs at least one method".into()));
    }
    CorruptionSpec::LogitGaussian { a, b, sigma: 0.0 }
        .validate()
        .map_err(|e| Error::Usage(e.to_string()))?;
    let etas = model.sample(n, seed.child(0))?;
    let clean_estimate = estimate_bayes_error(&etas);
    let rows: Vec<OrderBreakRow> = sigmas
        .iter()
        .map(|&sigma| {
            let spec = CorruptionSpec::LogitGaussian { a, b, sigma };
            let sample = corrupted_hard_label_pipeline(&etas, &spec, m, seed.child(1))?;
            let tau = kendall_tau(etas.values(), sample.corrupted_posterior.values())?;
            let data = PairedDataset::new(sample.corrupted.into_inner(), sample.labels)?;
            let estimates = methods
                .iter()
                .map(|est| Ok((est.to_string(), est.estimate(&data)?)))
                .collect::<Result<_>>()?;
            Ok(OrderBreakRow {
                sigma,
                tau,
                order_break_probability: order_break_probability(tau.clamp(-1.0, 1.0))?,
                estimates,
            })
        })
        .collect::<Result<_>>()?;
    let plots = methods
        .iter()
        .map(|est| {
            let name = est.to_string();
            let y: Vec<f64> = rows.iter().map(|r| r.estimates[&name]).collect();
            let series = PlotSeries {
                x: rows.iter().map(|r| r.tau).collect(),
                y_lo: y.clone(),
                y_hi: y.clone(),
                y,
            };
            (name, series)
        })
        .collect();
    Ok(OrderBreakSweep {
        distribution: model.clone(),
        a,
        b,
        m,
        n,
        seed: seed.0,
        clean_estimate,
        rows,
        plots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::HardLabelCounts;

    #[test]
    fn method_names() {
        for s in [
            "clean",
            "hard",
            "corrupted",
            "isotonic",
            "hist-20",
            "beta-ab",
            "platt",
        ] {
            assert_eq!(s.parse::<EstimateMethod>().unwrap().to_string(), s);
        }
        assert!(matches!(
            "bogus".parse::<EstimateMethod>(),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn format_mismatch_is_usage_error() {
        let soft = Dataset::Soft(SoftLabelSet::new(vec![0.5; 4]).unwrap());
        let err = estimate_with(&soft, EstimateMethod::Hard, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("counts"));
        let err = estimate_with(&soft, "isotonic".parse().unwrap(), None).unwrap_err();
        assert!(err.to_string().contains("paired"));
    }

    #[test]
    fn trivial_estimates() {
        let soft = Dataset::Soft(SoftLabelSet::new(vec![0.5; 10]).unwrap());
        assert_eq!(
            estimate_with(&soft, EstimateMethod::Clean, None)
                .unwrap()
                .point_estimate,
            0.5
        );
        let counts = Dataset::Counts(HardLabelCounts::from_pairs(&[(0, 50); 10]).unwrap());
        assert_eq!(
            estimate_with(&counts, EstimateMethod::Hard, None)
                .unwrap()
                .point_estimate,
            0.0
        );
    }

    #[test]
    fn generated_paired_scores_follow_corruption() {
        let model = PosteriorModel::preset("benchmark").unwrap();
        let spec = CorruptionSpec::Beta { a: 2.0, b: 0.7 };
        let g = generate(&model, 500, None, Some(&spec), Seed(0)).unwrap();
        let paired = g.paired.unwrap();
        for (s, e) in paired.scores().iter().zip(g.soft.values()) {
            assert_eq!(*s, crate::synthdata::beta_corruption(*e, 2.0, 0.7).unwrap());
        }
        assert!(g.counts.is_none());
    }

    #[test]
    fn zero_sigma_keeps_order() {
        let model = PosteriorModel::preset("benchmark").unwrap();
        let methods = [PairedEstimator::Calibrated(CalibrationMethod::Isotonic)];
        let r = order_break_sweep(
            &model,
            &[0.0, 0.5, 2.0],
            2.0,
            0.7,
            None,
            3000,
            &methods,
            Seed(1),
        )
        .unwrap();
        assert_eq!(r.rows[0].tau, 1.0);
        assert!(r.rows[1].tau >= r.rows[2].tau);
    }

    #[test]
    fn simulate_bias_requires_repeats() {
        let model = PosteriorModel::preset("c").unwrap();
        assert!(simulate_bias(&model, &[10], 100, 1, Seed(0)).is_err());
        let r = simulate_bias(&model, &[10, 100], 500, 10, Seed(0)).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows[0].separated_bound.is_some());
    }
}
