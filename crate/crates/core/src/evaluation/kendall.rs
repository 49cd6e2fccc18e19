use crate::error::{Error, Result};

/// Counts inversions of `v` while merge-sorting it; equal elements are not inversions.
fn sort_count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps =
        sort_count_inversions(&mut v[..mid], buf) + sort_count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf.push(v[i]);
            i += 1;
        } else {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Number of pairs tied within runs of equal values in sorted `v`.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Kendall's tau-a, `(concordant - discordant) / (n (n - 1) / 2)`, in
/// `O(n log n)` (Knight's merge-sort algorithm).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "kendall_tau: lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::domain("kendall_tau needs at least two observations"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::domain("kendall_tau: NaN input"));
    }
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let total = (n as u64) * (n as u64 - 1) / 2;
    let ties_a = tied_pairs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let ties_ab = tied_pairs(&pairs);

    let mut bs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(n);
    let swaps = sort_count_inversions(&mut bs, &mut buf);
    let ties_b = tied_pairs(&bs);

    // concordant - discordant
    let net = total as i128 - ties_a as i128 - ties_b as i128 + ties_ab as i128 - 2 * swaps as i128;
    Ok(net as f64 / total as f64)
}

/// Probability that a random pair's order is reversed, `(1 - tau) / 2`.
pub fn order_break_probability(tau: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::domain(format!("tau = {tau} not in [-1, 1]")));
    }
    Ok((1.0 - tau) / 2.0)
}
