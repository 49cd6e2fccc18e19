//! Bias and consistency bounds for the hard-label-averaged estimator.
//!
//! All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{kahan_sum, SoftLabelSet};

/// `sqrt(pi / (2m))`, the worst-case bias magnitude for `m` hard labels.
pub fn slow_rate_term(m: u64) -> f64 {
    (std::f64::consts::PI / (2.0 * m as f64)).sqrt()
}

fn check_m(m: u64) -> Result<()> {
    if m == 0 {
        return Err(Error::domain("number of hard labels m must be at least 1"));
    }
    Ok(())
}

/// `q(1 - q) / |2q - 1|`, infinite at `q = 0.5`.
pub fn l_err(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("l_err: {q} is outside [0, 1]")));
    }
    if q == 0.5 {
        return Ok(f64::INFINITY);
    }
    Ok(q * (1.0 - q) / (2.0 * q - 1.0).abs())
}

/// Sample-average magnitude of the lower bias bound,
/// `mean_i min(L_Err(eta_i) / m, sqrt(pi / (2m)))`.
pub fn bias_bound_thm21(soft_labels: &SoftLabelSet, m: u64) -> Result<f64> {
    check_m(m)?;
    let cap = slow_rate_term(m);
    let mf = m as f64;
    let total = kahan_sum(
        soft_labels
            .values()
            .iter()
            .map(|&q| (l_err(q).expect("validated soft label") / mf).min(cap)),
    );
    Ok(total / soft_labels.len() as f64)
}

/// `(1 - 4c^2) / (8cm)` for distributions with `|eta - 1/2| >= c` almost surely.
pub fn bias_bound_separated(c: f64, m: u64) -> Result<f64> {
    check_m(m)?;
    if !(c > 0.0 && c <= 0.5) {
        return Err(Error::domain(format!(
            "separation margin c = {c} not in (0, 0.5]"
        )));
    }
    Ok((1.0 - 4.0 * c * c) / (8.0 * c * m as f64))
}

/// Previously published bias bound `1/(2 sqrt m) + sqrt(ln(2 n sqrt m) / m)`.
pub fn ishida_bias_bound(n: u64, m: u64) -> Result<f64> {
    check_m(m)?;
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(0.5 / mf.sqrt() + ((2.0 * nf * mf.sqrt()).ln() / mf).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputableBound {
    pub value: f64,
    /// Minimizing threshold. When the infimum is the `t -> 0+` limit this is
    /// the left end of the search grid.
    pub argmin_t: f64,
}

/// Objective of the computable bound at threshold `t in (0, 1/2)`.
pub fn computable_bound_objective(t: f64, e: f64, m: u64) -> f64 {
    let mf = m as f64;
    t * (1.0 - t) / ((1.0 - 2.0 * t) * mf) + (e / t).min(1.0) * slow_rate_term(m)
}

const GRID_POINTS: usize = 200;
const T_TOL: f64 = 1e-9;

fn log_grid(lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..GRID_POINTS)
        .map(|i| (a + (b - a) * i as f64 / (GRID_POINTS - 1) as f64).exp())
        .collect()
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > T_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let t = 0.5 * (lo + hi);
    (t, f(t))
}

/// Infimum over `t in (0, 1/2)` of
/// `t(1-t)/((1-2t) m) + min(1, E/t) sqrt(pi/(2m))`, given an upper bound
/// `E` on the Bayes error.
///
/// On `t <= E` the objective is increasing, so its infimum is the `t -> 0+`
/// limit `sqrt(pi/(2m))`. On `t >= E` it is convex; the minimum is bracketed
/// on a log-spaced grid and refined by golden-section search.
pub fn computable_bias_bound(e: f64, m: u64) -> Result<ComputableBound> {
    check_m(m)?;
    if !(e > 0.0 && e <= 0.5) {
        return Err(Error::domain(format!(
            "Bayes error bound E = {e} not in (0, 0.5]"
        )));
    }
    let limit = slow_rate_term(m);
    let left = ComputableBound {
        value: limit,
        argmin_t: e.min(0.5) * 1e-12,
    };
    if e >= 0.5 {
        return Ok(left);
    }

    let hi = 0.5 * (1.0 - 1e-12);
    let g = |t: f64| computable_bound_objective(t, e, m);
    let grid = log_grid(e, hi);
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| (i, g(t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    let lo = grid[best.saturating_sub(1)];
    let up = grid[(best + 1).min(GRID_POINTS - 1)];
    let (t, v) = golden_section(g, lo, up);
    let (t, v) = if g(grid[best]) < v {
        (grid[best], g(grid[best]))
    } else {
        (t, v)
    };

    if v < left.value {
        Ok(ComputableBound {
            value: v,
            argmin_t: t,
        })
    } else {
        Ok(left)
    }
}

/// Finite-sample deviation bound holding with probability `1 - delta`:
/// `sqrt(ln(2/delta) / (2n))` plus the bias term, which is `sqrt(pi/(2m))`
/// in general or `(1 - 4c^2)/(8cm)` under a separation margin `c`.
pub fn consistency_bound(n: u64, m: u64, delta: f64, c: Option<f64>) -> Result<f64> {
    check_m(m)?;
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta = {delta} not in (0, 1)")));
    }
    let deviation = ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt();
    let bias = match c {
        Some(c) => bias_bound_separated(c, m)?,
        None => slow_rate_term(m),
    };
    Ok(deviation + bias)
}

/// Shape `C (n^(-1/3) + sqrt(ln(1/delta) / n))` of the isotonic-calibration
/// error guarantee, for a caller-supplied constant `C`.
pub fn isotonic_error_bound(n: u64, delta: f64, constant: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("delta = {delta} not in (0, 1]")));
    }
    if constant < 0.0 {
        return Err(Error::domain("constant must be nonnegative"));
    }
    let nf = n as f64;
    Ok(constant * (nf.powf(-1.0 / 3.0) + ((1.0 / delta).ln() / nf).sqrt()))
}

/// Every bound computable from the supplied parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BiasBoundReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thm21_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separated_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub computable_bound: Option<ComputableBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ishida_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slow_rate_term: Option<f64>,
    pub parameters: BoundParameters,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParameters {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(rename = "E", skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl BiasBoundReport {
    /// Computes what the parameters allow; fails when nothing is computable.
    pub fn compute(params: BoundParameters, soft_labels: Option<&SoftLabelSet>) -> Result<Self> {
        let mut report = BiasBoundReport {
            parameters: params.clone(),
            ..Default::default()
        };
        if let Some(m) = params.m {
            report.slow_rate_term = Some(slow_rate_term(m));
            if let Some(labels) = soft_labels {
                report.thm21_bound = Some(bias_bound_thm21(labels, m)?);
            }
            if let Some(c) = params.c {
                report.separated_bound = Some(bias_bound_separated(c, m)?);
            }
            if let Some(e) = params.e {
                report.computable_bound = Some(computable_bias_bound(e, m)?);
            }
            if let Some(n) = params.n {
                report.ishida_bound = Some(ishida_bias_bound(n, m)?);
                if let Some(delta) = params.delta {
                    report.consistency_bound = Some(consistency_bound(n, m, delta, params.c)?);
                }
            }
        }
        let any = report.thm21_bound.is_some()
            || report.separated_bound.is_some()
            || report.computable_bound.is_some()
            || report.ishida_bound.is_some();
        if !any {
            return Err(Error::Usage(
                "no bound is computable: thm21 needs --m and a soft-label --input, \
                 separated needs --m and --c, computable needs --m and --E, \
                 ishida needs --n and --m"
                    .into(),
            ));
        }
        Ok(report)
    }
}
