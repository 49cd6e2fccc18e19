//! Weighted least-squares projection onto the nondecreasing cone.

use crate::error::{Error, Result};

/// A maximal run of pooled points sharing one fitted value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub start: usize,
    pub len: usize,
    pub weight: f64,
    pub value: f64,
}

fn validate(values: &[f64], weights: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::domain("pav: empty input"));
    }
    if values.len() != weights.len() {
        return Err(Error::domain(format!(
            "pav: {} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("pav: non-finite value {v}")));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::domain(format!("pav: weight {w} is not positive")));
    }
    Ok(())
}

/// Pool-adjacent-violators in block form.
pub fn pav_blocks(values: &[f64], weights: &[f64]) -> Result<Vec<Block>> {
    validate(values, weights)?;
    let mut blocks: Vec<Block> = Vec::with_capacity(values.len());
    for (i, (&v, &w)) in values.iter().zip(weights).enumerate() {
        let mut cur = Block {
            start: i,
            len: 1,
            weight: w,
            value: v,
        };
        while let Some(prev) = blocks.last() {
            if prev.value <= cur.value {
                break;
            }
            let prev = blocks.pop().unwrap();
            let weight = prev.weight + cur.weight;
            cur = Block {
                start: prev.start,
                len: prev.len + cur.len,
                weight,
                value: (prev.value * prev.weight + cur.value * cur.weight) / weight,
            };
        }
        blocks.push(cur);
    }
    // Rounding in the pooled means can leave a block a few ulps below its
    // predecessor; flatten so the output is exactly nondecreasing.
    for i in 1..blocks.len() {
        if blocks[i].value < blocks[i - 1].value {
            blocks[i].value = blocks[i - 1].value;
        }
    }
    Ok(blocks)
}

/// Isotonic (nondecreasing) weighted least-squares fit, expanded to the
/// input length.
pub fn pav_fit(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let blocks = pav_blocks(values, weights)?;
    let mut out = Vec::with_capacity(values.len());
    for b in &blocks {
        out.extend(std::iter::repeat_n(b.value, b.len));
    }
    Ok(out)
}

/// Unit-weight isotonic fit.
pub fn pav_fit_unweighted(values: &[f64]) -> Result<Vec<f64>> {
    pav_fit(values, &vec![1.0; values.len()])
}

/// Brute-force evaluation of the min-max representation
/// `mu_i = min_{l >= i} max_{k <= i} mean(values[k..=l])`.
///
/// Cubic in the input length; intended only as a reference for testing.
pub fn minmax_oracle(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::domain("minmax_oracle: empty input"));
    }
    let n = values.len();
    let mean = |k: usize, l: usize| values[k..=l].iter().sum::<f64>() / (l - k + 1) as f64;
    Ok((0..n)
        .map(|i| {
            (i..n)
                .map(|l| {
                    (0..=i)
                        .map(|k| mean(k, l))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}
