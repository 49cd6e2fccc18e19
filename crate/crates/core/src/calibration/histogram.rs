use super::model::{flags, CalibrationMap, CalibratorModel, FitInfo};
use super::PairedDataset;
use crate::error::{Error, Result};

/// Uniform-mass histogram binning.
///
/// Sorted scores are split into `bins` contiguous groups whose sizes differ
/// by at most one (the larger groups come first). Each bin predicts its label
/// mean. Interior edges sit midway between the last score of one bin and the
/// first score of the next. A boundary that would split a group of tied
/// scores moves right to the end of that group; bins it overtakes are merged.
pub fn histogram_fit(data: &PairedDataset, bins: usize) -> Result<CalibratorModel> {
    let n = data.len();
    if bins == 0 {
        return Err(Error::domain("histogram_fit: bins must be at least 1"));
    }
    if bins > n {
        return Err(Error::domain(format!(
            "histogram_fit: {bins} bins for {n} points"
        )));
    }
    let order = data.sorted_order();
    let scores: Vec<f64> = order.iter().map(|&i| data.scores()[i]).collect();
    let labels: Vec<f64> = order
        .iter()
        .map(|&i| f64::from(u8::from(data.labels()[i])))
        .collect();

    let base = n / bins;
    let extra = n % bins;
    let mut cuts = Vec::with_capacity(bins);
    let mut target = 0;
    for j in 0..bins - 1 {
        target += base + usize::from(j < extra);
        let mut cut = target.max(cuts.last().map_or(0, |&c| c + 1));
        while cut < n && scores[cut - 1] == scores[cut] {
            cut += 1;
        }
        if cut < n {
            cuts.push(cut);
        }
    }
    cuts.push(n);
    let merged = cuts.len() < bins;

    let mut edges = vec![0.0];
    let mut sums: Vec<f64> = Vec::with_capacity(cuts.len());
    let mut counts: Vec<usize> = Vec::with_capacity(cuts.len());
    let mut start = 0;
    for &end in &cuts {
        if start > 0 {
            edges.push(0.5 * (scores[start - 1] + scores[start]));
        }
        sums.push(labels[start..end].iter().sum());
        counts.push(end - start);
        start = end;
    }
    edges.push(1.0);

    let values = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (s / c as f64).clamp(0.0, 1.0))
        .collect();
    let mut model_flags = Vec::new();
    if merged {
        model_flags.push(flags::MERGED_TIED_BINS.to_string());
    }
    if data.is_single_class() {
        model_flags.push(flags::SINGLE_CLASS.to_string());
    }
    Ok(CalibratorModel {
        map: CalibrationMap::Histogram {
            edges,
            values,
            counts,
        },
        flags: model_flags,
        fit: FitInfo {
            n,
            ..Default::default()
        },
    })
}
