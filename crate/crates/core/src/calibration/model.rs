use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::{clip_probability, BetaVariant};
use crate::error::{Error, Result};

/// Fitted payload of a calibration map.
#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationMap {
    /// Right-continuous step function: `values[j]` applies from
    /// `breakpoints[j]` up to the next breakpoint.
    Isotonic {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// Uniform-mass bins. `edges` has one more entry than `values` and runs
    /// from 0 to 1.
    Histogram {
        edges: Vec<f64>,
        values: Vec<f64>,
        counts: Vec<usize>,
    },
    /// `sigmoid(a ln p - b ln(1 - p) + c)`.
    Beta {
        variant: BetaVariant,
        a: f64,
        b: f64,
        c: f64,
    },
    /// `sigmoid(slope * s + intercept)`.
    Platt { slope: f64, intercept: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
}

/// A fitted, immutable monotone score-to-probability map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelRepr", try_from = "ModelRepr")]
pub struct CalibratorModel {
    pub map: CalibrationMap,
    pub flags: Vec<String>,
    pub fit: FitInfo,
}

pub mod flags {
    pub const MONOTONE_REPAIR: &str = "monotone-repair";
    pub const SEPARATION_CAP: &str = "separation-cap";
    pub const NOT_CONVERGED: &str = "not-converged";
    pub const GRADIENT_FALLBACK: &str = "gradient-fallback";
    pub const MERGED_TIED_BINS: &str = "merged-tied-bins";
    pub const SINGLE_CLASS: &str = "single-class";
    pub const TARGET_SMOOTHING: &str = "platt-target-smoothing";
}

impl CalibratorModel {
    pub fn family(&self) -> &'static str {
        match &self.map {
            CalibrationMap::Isotonic { .. } => "isotonic",
            CalibrationMap::Histogram { .. } => "histogram",
            CalibrationMap::Beta { variant, .. } => variant.name(),
            CalibrationMap::Platt { .. } => "platt",
        }
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    /// Calibrated probability for a single score, clamped to `[0, 1]`.
    pub fn predict(&self, score: f64) -> f64 {
        let p = match &self.map {
            CalibrationMap::Isotonic {
                breakpoints,
                values,
            } => {
                let idx = breakpoints.partition_point(|&b| b <= score);
                values[idx.saturating_sub(1)]
            }
            CalibrationMap::Histogram { edges, values, .. } => {
                // interior edges only; a score on an edge belongs to the right bin
                let idx = edges[1..edges.len() - 1].partition_point(|&e| e <= score);
                values[idx]
            }
            CalibrationMap::Beta { a, b, c, .. } => {
                let p = clip_probability(score);
                sigmoid(a * p.ln() - b * (-p).ln_1p() + c)
            }
            CalibrationMap::Platt { slope, intercept } => sigmoid(slope * score + intercept),
        };
        if p.is_nan() {
            0.5
        } else {
            p.clamp(0.0, 1.0)
        }
    }

    pub fn apply(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.predict(s)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    family: String,
    payload: serde_json::Value,
    flags: Vec<String>,
    fit: FitInfo,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepPayload {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramPayload {
    edges: Vec<f64>,
    values: Vec<f64>,
    counts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BetaPayload {
    a: f64,
    b: f64,
    c: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlattPayload {
    slope: f64,
    intercept: f64,
}

impl From<CalibratorModel> for ModelRepr {
    fn from(model: CalibratorModel) -> Self {
        let family = model.family().to_string();
        let payload = match model.map {
            CalibrationMap::Isotonic {
                breakpoints,
                values,
            } => serde_json::to_value(StepPayload {
                breakpoints,
                values,
            }),
            CalibrationMap::Histogram {
                edges,
                values,
                counts,
            } => serde_json::to_value(HistogramPayload {
                edges,
                values,
                counts,
            }),
            CalibrationMap::Beta { a, b, c, .. } => serde_json::to_value(BetaPayload { a, b, c }),
            CalibrationMap::Platt { slope, intercept } => {
                serde_json::to_value(PlattPayload { slope, intercept })
            }
        }
        .expect("payload of finite floats serializes");
        ModelRepr {
            family,
            payload,
            flags: model.flags,
            fit: model.fit,
        }
    }
}

impl TryFrom<ModelRepr> for CalibratorModel {
    type Error = Error;

    fn try_from(repr: ModelRepr) -> Result<Self> {
        let map = match repr.family.as_str() {
            "isotonic" => {
                let p: StepPayload = serde_json::from_value(repr.payload)?;
                if p.breakpoints.is_empty() || p.breakpoints.len() != p.values.len() {
                    return Err(Error::Data("isotonic payload is malformed".into()));
                }
                if p.breakpoints.windows(2).any(|w| w[0] >= w[1])
                    || p.values.windows(2).any(|w| w[0] > w[1])
                {
                    return Err(Error::Data("isotonic payload is not monotone".into()));
                }
                CalibrationMap::Isotonic {
                    breakpoints: p.breakpoints,
                    values: p.values,
                }
            }
            "histogram" => {
                let p: HistogramPayload = serde_json::from_value(repr.payload)?;
                if p.values.is_empty()
                    || p.edges.len() != p.values.len() + 1
                    || p.counts.len() != p.values.len()
                    || p.edges.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(Error::Data("histogram payload is malformed".into()));
                }
                CalibrationMap::Histogram {
                    edges: p.edges,
                    values: p.values,
                    counts: p.counts,
                }
            }
            "platt" => {
                let p: PlattPayload = serde_json::from_value(repr.payload)?;
                CalibrationMap::Platt {
                    slope: p.slope,
                    intercept: p.intercept,
                }
            }
            other => {
                let variant: BetaVariant = other
                    .parse()
                    .map_err(|_| Error::Data(format!("unknown calibrator family '{other}'")))?;
                let p: BetaPayload = serde_json::from_value(repr.payload)?;
                CalibrationMap::Beta {
                    variant,
                    a: p.a,
                    b: p.b,
                    c: p.c,
                }
            }
        };
        Ok(CalibratorModel {
            map,
            flags: repr.flags,
            fit: repr.fit,
        })
    }
}
