//! Unregularized logistic regression by box-constrained Newton iterations.
//!
//! Shared by the beta and Platt calibrators. Coefficients are kept inside
//! `[-cap, cap]`; under (quasi-)separation the likelihood has no finite
//! maximizer and the fit stops on the box with `capped` set.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub intercept: bool,
    /// Convergence threshold on the largest score-equation component.
    pub tol: f64,
    pub max_iter: usize,
    pub coef_cap: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            intercept: true,
            tol: 1e-10,
            max_iter: 100,
            coef_cap: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// Zero when fitted without an intercept.
    pub intercept: f64,
    /// One coefficient per feature column, in input order.
    pub coefficients: Vec<f64>,
    pub converged: bool,
    /// At least one coefficient sits on the `coef_cap` box.
    pub capped: bool,
    pub iterations: usize,
    /// The Hessian was singular at some iterate and a gradient step was used.
    pub gradient_fallback: bool,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

struct Problem<'a> {
    columns: Vec<&'a [f64]>,
    targets: &'a [f64],
    intercept: bool,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.columns.len() + usize::from(self.intercept)
    }

    fn row(&self, i: usize, out: &mut [f64]) {
        let mut k = 0;
        if self.intercept {
            out[0] = 1.0;
            k = 1;
        }
        for (j, c) in self.columns.iter().enumerate() {
            out[k + j] = c[i];
        }
    }

    fn linear(&self, theta: &[f64], i: usize, row: &mut [f64]) -> f64 {
        self.row(i, row);
        row.iter().zip(theta).map(|(x, t)| x * t).sum()
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let mut row = vec![0.0; self.dim()];
        (0..self.targets.len())
            .map(|i| {
                let z = self.linear(theta, i, &mut row);
                let y = self.targets[i];
                -(y * softplus(-z) + (1.0 - y) * softplus(z))
            })
            .sum()
    }

    /// Gradient and Hessian of the log-likelihood (Hessian of the negative).
    fn derivatives(&self, theta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let p = self.dim();
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        let mut row = vec![0.0; p];
        for i in 0..self.targets.len() {
            let mu = sigmoid(self.linear(theta, i, &mut row));
            let r = self.targets[i] - mu;
            let w = mu * (1.0 - mu);
            for a in 0..p {
                grad[a] += r * row[a];
                for b in 0..=a {
                    hess[a][b] += w * row[a] * row[b];
                }
            }
        }
        for a in 1..p {
            let (upper, lower) = hess.split_at_mut(a);
            for (b, row) in upper.iter_mut().enumerate() {
                row[a] = lower[0][b];
            }
        }
        (grad, hess)
    }
}

/// Solves `h x = g` by Cholesky; `None` when `h` is not numerically positive definite.
fn cholesky_solve(h: &[Vec<f64>], g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let scale = (0..n).map(|i| h[i][i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = h[i][i] - s;
                if d <= scale * 1e-13 {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (h[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (g[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    Some(x)
}

/// Maximum-likelihood logistic regression.
///
/// `features` holds one column per predictor; `targets` are in `[0, 1]`
/// (binary labels, or smoothed targets).
pub fn logistic_fit(
    features: &[Vec<f64>],
    targets: &[f64],
    opts: &LogisticOptions,
) -> Result<LogisticFit> {
    let n = targets.len();
    if features.iter().any(|c| c.len() != n) {
        return Err(Error::fit("logistic_fit: feature columns differ in length"));
    }
    let problem = Problem {
        columns: features.iter().map(Vec::as_slice).collect(),
        targets,
        intercept: opts.intercept,
    };
    let p = problem.dim();
    if n < p || n == 0 {
        return Err(Error::fit(format!(
            "logistic_fit: {n} observations for {p} parameters"
        )));
    }
    if features.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::fit("logistic_fit: non-finite feature"));
    }
    if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::fit("logistic_fit: targets must lie in [0, 1]"));
    }

    let cap = opts.coef_cap;
    let mut theta = vec![0.0; p];
    let mut ll = problem.log_likelihood(&theta);
    let mut converged = false;
    let mut gradient_fallback = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let (grad, hess) = problem.derivatives(&theta);
        // Coordinates pinned on the box with the gradient pointing outward
        // satisfy their KKT condition and are held fixed.
        let free: Vec<usize> = (0..p)
            .filter(|&j| !(theta[j].abs() >= cap && grad[j] * theta[j] > 0.0))
            .collect();
        let max_grad = free.iter().map(|&j| grad[j].abs()).fold(0.0, f64::max);
        if free.is_empty() {
            break;
        }

        let g_free: Vec<f64> = free.iter().map(|&j| grad[j]).collect();
        let h_free: Vec<Vec<f64>> = free
            .iter()
            .map(|&a| free.iter().map(|&b| hess[a][b]).collect())
            .collect();
        let (dir, newton) = match cholesky_solve(&h_free, &g_free) {
            Some(d) => (d, true),
            None => {
                gradient_fallback = true;
                (g_free.clone(), false)
            }
        };
        // A small score alone is not enough: under separation the score decays
        // geometrically while full Newton steps keep pushing toward the cap.
        let max_dir = dir.iter().map(|d| d.abs()).fold(0.0, f64::max);
        let max_theta = theta.iter().map(|t| t.abs()).fold(0.0, f64::max);
        if max_grad < opts.tol && (!newton || max_dir <= 1e-6 * (1.0 + max_theta)) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..64 {
            let mut cand = theta.clone();
            for (k, &j) in free.iter().enumerate() {
                cand[j] = (theta[j] + step * dir[k]).clamp(-cap, cap);
            }
            let cand_ll = problem.log_likelihood(&cand);
            if cand_ll > ll || (cand_ll == ll && cand != theta && newton) {
                accepted = Some((cand, cand_ll));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, cand_ll)) => {
                let moved = cand
                    .iter()
                    .zip(&theta)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                theta = cand;
                ll = cand_ll;
                if newton
                    && moved <= 1e-15 * (1.0 + theta.iter().map(|t| t.abs()).fold(0.0, f64::max))
                {
                    // Newton step below double resolution: stationary.
                    converged = true;
                    break;
                }
            }
            None => {
                // No representable ascent step remains; accept a Newton
                // iterate whose decrement is at rounding level.
                let decrement: f64 = g_free.iter().zip(&dir).map(|(g, d)| g * d).sum();
                converged = newton && decrement <= 1e-12 * (1.0 + ll.abs());
                break;
            }
        }
    }

    let capped = theta.iter().any(|t| t.abs() >= cap);
    let (intercept, coefficients) = if opts.intercept {
        (theta[0], theta[1..].to_vec())
    } else {
        (0.0, theta)
    };
    Ok(LogisticFit {
        intercept,
        coefficients,
        converged: converged && !capped,
        capped,
        iterations,
        gradient_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use rand::Rng;

    /// Plain gradient ascent with a fixed small step and many iterations;
    /// shares nothing with the Newton path beyond the model definition.
    fn reference_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let (mut b0, mut b1) = (0.0f64, 0.0f64);
        for _ in 0..200_000 {
            let (mut g0, mut g1) = (0.0, 0.0);
            for (xi, yi) in x.iter().zip(y) {
                let mu = 1.0 / (1.0 + (-(b0 + b1 * xi)).exp());
                g0 += yi - mu;
                g1 += (yi - mu) * xi;
            }
            b0 += 0.5 * g0 / n;
            b1 += 0.5 * g1 / n;
        }
        (b1, b0)
    }

    #[test]
    fn recovers_generating_coefficients() {
        let mut rng = Seed(0).rng();
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| f64::from(rng.random::<f64>() < sigmoid(2.0 * xi + 1.0)))
            .collect();
        let fit = logistic_fit(std::slice::from_ref(&x), &y, &LogisticOptions::default()).unwrap();
        assert!(fit.converged);
        let (slope, intercept) = reference_fit(&x, &y);
        assert!(
            (fit.coefficients[0] - slope).abs() < 1e-4,
            "{fit:?} vs {slope}"
        );
        assert!(
            (fit.intercept - intercept).abs() < 1e-4,
            "{fit:?} vs {intercept}"
        );
        assert!((fit.coefficients[0] - 2.0).abs() <= 0.4);
        assert!((fit.intercept - 1.0).abs() <= 0.4);
    }

    #[test]
    fn all_positive_labels_cap_intercept() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 - 19.5) / 10.0).collect();
        let y = vec![1.0; 40];
        let fit = logistic_fit(&[x], &y, &LogisticOptions::default()).unwrap();
        assert!(fit.capped);
        assert!(!fit.converged);
        assert_eq!(fit.intercept, 30.0);
        assert!(fit.coefficients[0].abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn symmetric_separable_data() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..50 {
            x.extend([-1.0, 1.0]);
            y.extend([0.0, 1.0]);
        }
        let fit = logistic_fit(&[x], &y, &LogisticOptions::default()).unwrap();
        // The intercept direction is nearly flat once the slope is capped.
        assert!(fit.intercept.abs() < 1e-6, "{fit:?}");
        assert!(fit.capped);
        assert!(fit.coefficients[0] > 0.0);
    }

    #[test]
    fn constant_feature_falls_back_to_gradient() {
        let x = vec![0.3; 10];
        let y: Vec<f64> = (0..10).map(|i| f64::from(i % 3 == 0)).collect();
        let fit = logistic_fit(&[x], &y, &LogisticOptions::default()).unwrap();
        assert!(fit.gradient_fallback);
        let p = sigmoid(fit.intercept + 0.3 * fit.coefficients[0]);
        assert!((p - 0.4).abs() < 1e-6, "{p}");
    }

    #[test]
    fn rejects_underdetermined() {
        assert!(logistic_fit(&[vec![1.0]], &[1.0], &LogisticOptions::default()).is_err());
        assert!(logistic_fit(&[vec![1.0, 2.0]], &[1.0], &LogisticOptions::default()).is_err());
    }

    #[test]
    fn no_intercept_fit() {
        let x = vec![-2.0, -1.0, 1.0, 2.0, -0.5, 0.5];
        let y = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let opts = LogisticOptions {
            intercept: false,
            ..Default::default()
        };
        let fit = logistic_fit(&[x], &y, &opts).unwrap();
        assert_eq!(fit.intercept, 0.0);
        assert!(fit.converged);
    }
}
