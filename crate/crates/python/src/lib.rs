//! Python bindings for the `bayeserr` crate.

use bayeserr_core as core;
use core::calibration::{CalibrationMethod, CalibratorModel, PairedDataset, PairedEstimator};
use core::estimator::{HardLabelCounts, SoftLabelSet};
use core::evaluation::{BootstrapOptions, CiMethod};
use core::synthdata::{CorruptionSpec, PosteriorModel};
use core::{Error, Seed};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::Fit(_) | Error::Numeric(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Converts a serializable report into plain Python objects.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| to_py(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn soft(values: Vec<f64>) -> PyResult<SoftLabelSet> {
    SoftLabelSet::new(values).py_err()
}

fn paired(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<PairedDataset> {
    PairedDataset::new(scores, labels).py_err()
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().py_err()
}

fn boot_options(
    resamples: usize,
    level: f64,
    method: &str,
    seed: u64,
) -> PyResult<BootstrapOptions> {
    Ok(BootstrapOptions {
        resamples,
        level,
        method: parse::<CiMethod>(method)?,
        seed: Seed(seed),
    })
}

fn posterior_model(dist: &str) -> PyResult<PosteriorModel> {
    PosteriorModel::preset(dist).ok_or_else(|| {
        PyValueError::new_err(format!(
            "unknown distribution '{dist}'; expected benchmark, a, b or c"
        ))
    })
}

fn corruption(kind: &str, a: f64, b: f64, sigma: f64) -> PyResult<CorruptionSpec> {
    let spec = match kind {
        "none" | "identity" => CorruptionSpec::Identity,
        "beta" => CorruptionSpec::Beta { a, b },
        "logit-gaussian" => CorruptionSpec::LogitGaussian { a, b, sigma },
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown corruption '{kind}'; expected none, beta or logit-gaussian"
            )))
        }
    };
    spec.validate().py_err()?;
    Ok(spec)
}

/// Plug-in Bayes error estimate: mean of `min(eta, 1 - eta)`.
#[pyfunction]
fn estimate_bayes_error(soft_labels: Vec<f64>) -> PyResult<f64> {
    Ok(core::estimate_bayes_error(&soft(soft_labels)?))
}

/// Soft labels `pos / total` from `(pos, total)` pairs.
#[pyfunction]
fn soft_from_hard(counts: Vec<(u64, u64)>) -> PyResult<Vec<f64>> {
    let counts = HardLabelCounts::from_pairs(&counts).py_err()?;
    Ok(core::soft_from_hard(&counts).py_err()?.into_inner())
}

#[pyfunction]
fn phi_err(q: f64) -> PyResult<f64> {
    core::estimator::phi_err(q).py_err()
}

/// A fitted calibration map.
#[pyclass(frozen, module = "pybayeserr")]
struct Calibrator {
    model: CalibratorModel,
}

#[pymethods]
impl Calibrator {
    /// Fits `method` (isotonic, hist-K, beta, beta-am, beta-ab, beta-a,
    /// platt, platt-smoothed) to scores and binary labels.
    #[staticmethod]
    fn fit(py: Python<'_>, method: &str, scores: Vec<f64>, labels: Vec<bool>) -> PyResult<Self> {
        let method: CalibrationMethod = parse(method)?;
        let data = paired(scores, labels)?;
        let model = py.detach(|| method.fit(&data)).py_err()?;
        Ok(Calibrator { model })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Calibrator {
            model: CalibratorModel::from_json(text).py_err()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.model.to_json().py_err()
    }

    fn apply(&self, scores: Vec<f64>) -> Vec<f64> {
        self.model.apply(&scores)
    }

    fn predict(&self, score: f64) -> f64 {
        self.model.predict(score)
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.model.family()
    }

    #[getter]
    fn flags(&self) -> Vec<String> {
        self.model.flags.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Calibrator(family={:?}, flags={:?})",
            self.model.family(),
            self.model.flags
        )
    }
}

/// Fits a calibrator and returns `(report, calibrator)`.
#[pyfunction]
fn calibrate_and_estimate<'py>(
    py: Python<'py>,
    scores: Vec<f64>,
    labels: Vec<bool>,
    method: &str,
) -> PyResult<(Bound<'py, PyAny>, Calibrator)> {
    let method: CalibrationMethod = parse(method)?;
    let data = paired(scores, labels)?;
    let (report, model) = py
        .detach(|| core::calibrate_and_estimate(&data, method))
        .py_err()?;
    Ok((to_object(py, &report)?, Calibrator { model }))
}

/// Estimate from a paired dataset; `method` is `corrupted` or a calibration method.
#[pyfunction]
fn estimate_paired(
    py: Python<'_>,
    scores: Vec<f64>,
    labels: Vec<bool>,
    method: &str,
) -> PyResult<f64> {
    let estimator: PairedEstimator = parse(method)?;
    let data = paired(scores, labels)?;
    py.detach(|| estimator.estimate(&data)).py_err()
}

#[pyfunction]
fn slow_rate_term(m: u64) -> f64 {
    core::bounds::slow_rate_term(m)
}

#[pyfunction]
fn bias_bound_thm21(soft_labels: Vec<f64>, m: u64) -> PyResult<f64> {
    core::bounds::bias_bound_thm21(&soft(soft_labels)?, m).py_err()
}

#[pyfunction]
fn bias_bound_separated(c: f64, m: u64) -> PyResult<f64> {
    core::bounds::bias_bound_separated(c, m).py_err()
}

/// Returns `(value, argmin_t)`.
#[pyfunction]
fn computable_bias_bound(e: f64, m: u64) -> PyResult<(f64, f64)> {
    let b = core::bounds::computable_bias_bound(e, m).py_err()?;
    Ok((b.value, b.argmin_t))
}

#[pyfunction]
fn ishida_bias_bound(n: u64, m: u64) -> PyResult<f64> {
    core::bounds::ishida_bias_bound(n, m).py_err()
}

#[pyfunction]
#[pyo3(signature = (n, m, delta, c=None))]
fn consistency_bound(n: u64, m: u64, delta: f64, c: Option<f64>) -> PyResult<f64> {
    core::bounds::consistency_bound(n, m, delta, c).py_err()
}

/// Clean posteriors from a preset distribution (benchmark, a, b, c).
#[pyfunction]
#[pyo3(signature = (n, dist="benchmark", seed=0))]
fn sample_posteriors(py: Python<'_>, n: usize, dist: &str, seed: u64) -> PyResult<Vec<f64>> {
    let model = posterior_model(dist)?;
    Ok(py
        .detach(|| model.sample(n, Seed(seed)))
        .py_err()?
        .into_inner())
}

#[pyfunction]
fn beta_corruption(p: f64, a: f64, b: f64) -> PyResult<f64> {
    core::synthdata::beta_corruption(p, a, b).py_err()
}

#[pyfunction]
fn beta_corruption_inverse(q: f64, a: f64, b: f64) -> PyResult<f64> {
    core::synthdata::beta_corruption_inverse(q, a, b).py_err()
}

/// Applies a corruption (none, beta, logit-gaussian) to posteriors.
#[pyfunction]
#[pyo3(signature = (etas, kind="beta", a=2.0, b=0.7, sigma=0.0, seed=0))]
fn corrupt(
    etas: Vec<f64>,
    kind: &str,
    a: f64,
    b: f64,
    sigma: f64,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let spec = corruption(kind, a, b, sigma)?;
    Ok(spec.apply(&soft(etas)?, Seed(seed)).py_err()?.into_inner())
}

/// `(pos, total)` counts of `m` hard labels per posterior.
#[pyfunction]
#[pyo3(signature = (etas, m, seed=0))]
fn sample_hard_labels(etas: Vec<f64>, m: u64, seed: u64) -> PyResult<Vec<(u64, u64)>> {
    let counts = core::synthdata::sample_hard_labels(&soft(etas)?, m, Seed(seed)).py_err()?;
    Ok(counts
        .entries()
        .iter()
        .map(|e| (e.positives, e.total))
        .collect())
}

/// Same data as the `gen` command: a dict with `soft`, and `counts` when `m`
/// is given, and `scores`/`labels` when `corruption` is given.
#[pyfunction]
#[pyo3(signature = (n, dist="benchmark", m=None, corruption=None, a=2.0, b=0.7, sigma=0.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn generate<'py>(
    py: Python<'py>,
    n: usize,
    dist: &str,
    m: Option<u64>,
    corruption: Option<&str>,
    a: f64,
    b: f64,
    sigma: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let model = posterior_model(dist)?;
    let spec = corruption
        .map(|k| self::corruption(k, a, b, sigma))
        .transpose()?;
    let data = py
        .detach(|| core::cli::commands::generate(&model, n, m, spec.as_ref(), Seed(seed)))
        .py_err()?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("soft", data.soft.values())?;
    if let Some(c) = &data.counts {
        let pairs: Vec<(u64, u64)> = c.entries().iter().map(|e| (e.positives, e.total)).collect();
        out.set_item("counts", pairs)?;
    }
    if let Some(p) = &data.paired {
        out.set_item("scores", p.scores())?;
        out.set_item("labels", p.labels())?;
    }
    Ok(out.into_any())
}

#[pyfunction]
fn kendall_tau(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    core::evaluation::kendall_tau(&a, &b).py_err()
}

#[pyfunction]
fn order_break_probability(tau: f64) -> PyResult<f64> {
    core::evaluation::order_break_probability(tau).py_err()
}

/// Returns `(slope, intercept)` of the least-squares line through `(ln m, ln bias)`.
#[pyfunction]
fn fit_loglog_slope(m_values: Vec<u64>, bias_values: Vec<f64>) -> PyResult<(f64, f64)> {
    let fit = core::evaluation::fit_loglog_slope(&m_values, &bias_values).py_err()?;
    Ok((fit.slope, fit.intercept))
}

/// Label-noise sweep score of an estimator; returns the full report as a dict.
#[pyfunction]
#[pyo3(signature = (scores, labels, method, e, n_grid=100, seed=0))]
fn feebee_score<'py>(
    py: Python<'py>,
    scores: Vec<f64>,
    labels: Vec<bool>,
    method: &str,
    e: f64,
    n_grid: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let estimator: PairedEstimator = parse(method)?;
    let data = paired(scores, labels)?;
    let report = py
        .detach(|| core::evaluation::feebee_score(&data, estimator, e, n_grid, Seed(seed)))
        .py_err()?;
    to_object(py, &report)
}

/// Bootstrap interval of the plug-in estimate on soft labels.
#[pyfunction]
#[pyo3(signature = (soft_labels, resamples=1000, level=0.95, method="bca", seed=0))]
fn bootstrap_soft<'py>(
    py: Python<'py>,
    soft_labels: Vec<f64>,
    resamples: usize,
    level: f64,
    method: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = boot_options(resamples, level, method, seed)?;
    let labels = soft(soft_labels)?;
    let ci = py
        .detach(|| core::evaluation::bootstrap_soft(&labels, &opts))
        .py_err()?;
    to_object(py, &ci)
}

/// Bootstrap interval of a paired estimator; calibration is refitted per resample.
#[pyfunction]
#[pyo3(signature = (scores, labels, estimator, resamples=1000, level=0.95, method="bca", seed=0))]
#[allow(clippy::too_many_arguments)]
fn bootstrap_paired<'py>(
    py: Python<'py>,
    scores: Vec<f64>,
    labels: Vec<bool>,
    estimator: &str,
    resamples: usize,
    level: f64,
    method: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let estimator: PairedEstimator = parse(estimator)?;
    let opts = boot_options(resamples, level, method, seed)?;
    let data = paired(scores, labels)?;
    let ci = py
        .detach(|| core::evaluation::bootstrap_paired(&data, estimator, &opts))
        .py_err()?;
    to_object(py, &ci)
}

#[pymodule]
fn pybayeserr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Calibrator>()?;
    m.add_function(wrap_pyfunction!(estimate_bayes_error, m)?)?;
    m.add_function(wrap_pyfunction!(soft_from_hard, m)?)?;
    m.add_function(wrap_pyfunction!(phi_err, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_and_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_paired, m)?)?;
    m.add_function(wrap_pyfunction!(slow_rate_term, m)?)?;
    m.add_function(wrap_pyfunction!(bias_bound_thm21, m)?)?;
    m.add_function(wrap_pyfunction!(bias_bound_separated, m)?)?;
    m.add_function(wrap_pyfunction!(computable_bias_bound, m)?)?;
    m.add_function(wrap_pyfunction!(ishida_bias_bound, m)?)?;
    m.add_function(wrap_pyfunction!(consistency_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sample_posteriors, m)?)?;
    m.add_function(wrap_pyfunction!(beta_corruption, m)?)?;
    m.add_function(wrap_pyfunction!(beta_corruption_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(corrupt, m)?)?;
    m.add_function(wrap_pyfunction!(sample_hard_labels, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(order_break_probability, m)?)?;
    m.add_function(wrap_pyfunction!(fit_loglog_slope, m)?)?;
    m.add_function(wrap_pyfunction!(feebee_score, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_soft, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_paired, m)?)?;
    Ok(())
}
