use super::model::{flags, CalibrationMap, CalibratorModel, FitInfo};
use super::pav::pav_blocks;
use super::PairedDataset;
use crate::error::Result;

/// Collapses sorted `(score, label)` pairs with equal scores into weighted
/// points `(score, label mean, count)`.
pub(crate) fn pool_ties(data: &PairedDataset) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let order = data.sorted_order();
    let mut scores: Vec<f64> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for i in order {
        let (s, y) = (data.scores()[i], f64::from(u8::from(data.labels()[i])));
        if scores.last() == Some(&s) {
            *sums.last_mut().unwrap() += y;
            *weights.last_mut().unwrap() += 1.0;
        } else {
            scores.push(s);
            sums.push(y);
            weights.push(1.0);
        }
    }
    let means = sums.iter().zip(&weights).map(|(s, w)| s / w).collect();
    (scores, means, weights)
}

/// Isotonic calibration: least-squares nondecreasing fit of labels against
/// score order, with tied scores pooled first.
pub fn isotonic_fit(data: &PairedDataset) -> Result<CalibratorModel> {
    let (scores, means, weights) = pool_ties(data);
    let blocks = pav_blocks(&means, &weights)?;
    let breakpoints = blocks.iter().map(|b| scores[b.start]).collect();
    let values = blocks.iter().map(|b| b.value.clamp(0.0, 1.0)).collect();
    let mut model_flags = Vec::new();
    if data.is_single_class() {
        model_flags.push(flags::SINGLE_CLASS.to_string());
    }
    Ok(CalibratorModel {
        map: CalibrationMap::Isotonic {
            breakpoints,
            values,
        },
        flags: model_flags,
        fit: FitInfo {
            n: data.len(),
            ..Default::default()
        },
    })
}
