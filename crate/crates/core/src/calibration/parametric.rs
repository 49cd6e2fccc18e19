//! Beta calibration (and its restricted variants) and Platt scaling.

use super::logistic::{logistic_fit, LogisticFit, LogisticOptions};
use super::model::{flags, CalibrationMap, CalibratorModel, FitInfo};
use super::{clip_probability, BetaVariant, PairedDataset};
use crate::error::{Error, Result};

/// Fits with the active subset of `columns`, dropping any column whose
/// coefficient comes out negative and refitting until all are nonnegative.
fn fit_nonnegative(
    columns: &[Vec<f64>],
    targets: &[f64],
    opts: &LogisticOptions,
) -> Result<(Vec<f64>, f64, LogisticFit, bool)> {
    let mut active: Vec<usize> = (0..columns.len()).collect();
    let mut repaired = false;
    loop {
        let cols: Vec<Vec<f64>> = active.iter().map(|&j| columns[j].clone()).collect();
        let fit = if cols.is_empty() && !opts.intercept {
            LogisticFit {
                intercept: 0.0,
                coefficients: vec![],
                converged: true,
                capped: false,
                iterations: 0,
                gradient_fallback: false,
            }
        } else {
            logistic_fit(&cols, targets, opts)?
        };
        let negative: Vec<usize> = fit
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, &c)| c < 0.0)
            .map(|(k, _)| k)
            .collect();
        if negative.is_empty() {
            let mut full = vec![0.0; columns.len()];
            for (k, &j) in active.iter().enumerate() {
                full[j] = fit.coefficients[k];
            }
            let intercept = fit.intercept;
            return Ok((full, intercept, fit, repaired));
        }
        repaired = true;
        active = active
            .iter()
            .enumerate()
            .filter(|(k, _)| !negative.contains(k))
            .map(|(_, &j)| j)
            .collect();
    }
}

fn fit_flags(fit: &LogisticFit, repaired: bool, data: &PairedDataset) -> Vec<String> {
    let mut out = Vec::new();
    if repaired {
        out.push(flags::MONOTONE_REPAIR.to_string());
    }
    if fit.capped {
        out.push(flags::SEPARATION_CAP.to_string());
    }
    if !fit.converged {
        out.push(flags::NOT_CONVERGED.to_string());
    }
    if fit.gradient_fallback {
        out.push(flags::GRADIENT_FALLBACK.to_string());
    }
    if data.is_single_class() {
        out.push(flags::SINGLE_CLASS.to_string());
    }
    out
}

fn binary_targets(data: &PairedDataset) -> Vec<f64> {
    data.labels()
        .iter()
        .map(|&y| f64::from(u8::from(y)))
        .collect()
}

/// Beta calibration `p -> sigmoid(a ln p - b ln(1 - p) + c)`.
///
/// Variants restrict the parameters: `beta-am` ties `b = a`, `beta-ab` fixes
/// the midpoint so that `c = (a - b) ln 2`, and `beta-a` applies both.
pub fn beta_fit(data: &PairedDataset, variant: BetaVariant) -> Result<CalibratorModel> {
    if data.distinct_scores() < 2 {
        return Err(Error::fit(format!(
            "{}: need at least two distinct scores",
            variant.name()
        )));
    }
    let clipped: Vec<f64> = data.scores().iter().map(|&s| clip_probability(s)).collect();
    let ln_p: Vec<f64> = clipped.iter().map(|p| p.ln()).collect();
    let neg_ln_q: Vec<f64> = clipped.iter().map(|p| -(-p).ln_1p()).collect();
    let targets = binary_targets(data);
    let ln2 = std::f64::consts::LN_2;

    let with_intercept = LogisticOptions::default();
    let without_intercept = LogisticOptions {
        intercept: false,
        ..Default::default()
    };

    let (a, b, c, fit, repaired) = match variant {
        BetaVariant::Beta => {
            let (coef, c, fit, rep) =
                fit_nonnegative(&[ln_p, neg_ln_q], &targets, &with_intercept)?;
            (coef[0], coef[1], c, fit, rep)
        }
        BetaVariant::BetaAb => {
            let ln_2p: Vec<f64> = ln_p.iter().map(|v| v + ln2).collect();
            let neg_ln_2q: Vec<f64> = neg_ln_q.iter().map(|v| v - ln2).collect();
            let (coef, _, fit, rep) =
                fit_nonnegative(&[ln_2p, neg_ln_2q], &targets, &without_intercept)?;
            (coef[0], coef[1], (coef[0] - coef[1]) * ln2, fit, rep)
        }
        BetaVariant::BetaAm | BetaVariant::BetaA => {
            let logit: Vec<f64> = ln_p.iter().zip(&neg_ln_q).map(|(x, y)| x + y).collect();
            let opts = if variant == BetaVariant::BetaAm {
                with_intercept
            } else {
                without_intercept
            };
            let (coef, c, fit, rep) = fit_nonnegative(&[logit], &targets, &opts)?;
            (coef[0], coef[0], c, fit, rep)
        }
    };

    Ok(CalibratorModel {
        map: CalibrationMap::Beta { variant, a, b, c },
        flags: fit_flags(&fit, repaired, data),
        fit: FitInfo {
            n: data.len(),
            converged: Some(fit.converged),
            iterations: Some(fit.iterations),
        },
    })
}

/// Platt scaling `s -> sigmoid(slope * s + intercept)` by maximum likelihood.
///
/// With `target_smoothing`, positive targets become `(N+ + 1) / (N+ + 2)` and
/// negative ones `1 / (N- + 2)`.
pub fn platt_fit(data: &PairedDataset, target_smoothing: bool) -> Result<CalibratorModel> {
    let mut targets = binary_targets(data);
    if target_smoothing {
        let pos = data.labels().iter().filter(|&&y| y).count() as f64;
        let neg = data.len() as f64 - pos;
        let hi = (pos + 1.0) / (pos + 2.0);
        let lo = 1.0 / (neg + 2.0);
        for t in targets.iter_mut() {
            *t = if *t > 0.5 { hi } else { lo };
        }
    }
    let (coef, intercept, fit, repaired) = fit_nonnegative(
        &[data.scores().to_vec()],
        &targets,
        &LogisticOptions::default(),
    )?;
    let mut model_flags = fit_flags(&fit, repaired, data);
    if target_smoothing {
        model_flags.push(flags::TARGET_SMOOTHING.to_string());
    }
    Ok(CalibratorModel {
        map: CalibrationMap::Platt {
            slope: coef[0],
            intercept,
        },
        flags: model_flags,
        fit: FitInfo {
            n: data.len(),
            converged: Some(fit.converged),
            iterations: Some(fit.iterations),
        },
    })
}
