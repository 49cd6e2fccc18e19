use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power-law fit `bias ~ exp(intercept) * m^slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub m_values: Vec<u64>,
    pub bias_values: Vec<f64>,
}

/// Ordinary least squares of `ln(bias)` on `ln(m)`.
pub fn fit_loglog_slope(m_values: &[u64], bias_values: &[f64]) -> Result<SlopeFit> {
    if m_values.len() != bias_values.len() {
        return Err(Error::domain("m and bias sequences differ in length"));
    }
    if m_values.len() < 2 {
        return Err(Error::domain("slope fit needs at least two points"));
    }
    if let Some(b) = bias_values.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::domain(format!("bias {b} is not positive")));
    }
    if m_values.contains(&0) {
        return Err(Error::domain("m values must be positive"));
    }
    let x: Vec<f64> = m_values.iter().map(|&m| (m as f64).ln()).collect();
    let y: Vec<f64> = bias_values.iter().map(|b| b.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain(
            "slope fit needs at least two distinct m values",
        ));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        m_values: m_values.to_vec(),
        bias_values: bias_values.to_vec(),
    })
}
