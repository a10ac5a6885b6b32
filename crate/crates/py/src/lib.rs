//! Python bindings.
//!
//! Exposes the experiment configuration, the closed-form prediction, single
//! realizations and Monte Carlo ensembles, plus the standalone bound and
//! moment functions.

use std::path::{Path, PathBuf};

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use securve::{
    ExperimentConfig, ImpulseSource, NoiseKind, NoiseSpec, RandomStream, SignalSpec, StepSetting,
};

fn value_error(err: securve::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn parse_kind(kind: &str) -> PyResult<NoiseKind> {
    kind.parse().map_err(PyValueError::new_err)
}

/// Closed-form steady-state statistics of the squared error.
#[pyclass(name = "Prediction", frozen, get_all, module = "securve")]
struct PyPrediction {
    j_min: f64,
    j_inf: f64,
    e4_inf: f64,
    var_e2_inf: f64,
    effective_mu: f64,
    kurtosis: f64,
    noise_kind: String,
    small_step_stressed: bool,
    /// `(lower, upper)` chi-square interval; `None` for non-Gaussian noise.
    gaussian_interval: Option<(f64, f64)>,
    three_sigma_upper: f64,
}

#[pymethods]
impl PyPrediction {
    fn __repr__(&self) -> String {
        format!(
            "Prediction(j_inf={:e}, var_e2_inf={:e}, effective_mu={:e}, kurtosis={})",
            self.j_inf, self.var_e2_inf, self.effective_mu, self.kurtosis
        )
    }
}

impl From<securve::Prediction> for PyPrediction {
    fn from(p: securve::Prediction) -> Self {
        Self {
            j_min: p.j_min,
            j_inf: p.j_inf,
            e4_inf: p.e4_inf,
            var_e2_inf: p.var_e2_inf,
            effective_mu: p.effective_mu,
            kurtosis: p.kurtosis,
            noise_kind: p.noise_kind.to_string(),
            small_step_stressed: p.small_step_stressed,
            gaussian_interval: p.gaussian_interval.map(|ci| (ci.lower, ci.upper)),
            three_sigma_upper: p.three_sigma_upper,
        }
    }
}

/// Steady-state moments pooled over an ensemble.
#[pyclass(name = "EnsembleStats", frozen, get_all, module = "securve")]
struct PyEnsembleStats {
    mean_e2: f64,
    mean_e4: f64,
    var_e2: f64,
    sample_count: usize,
    /// Fraction of steady-state samples inside the predicted bound.
    coverage: Option<f64>,
}

#[pymethods]
impl PyEnsembleStats {
    fn __repr__(&self) -> String {
        format!(
            "EnsembleStats(mean_e2={:e}, var_e2={:e}, sample_count={}, coverage={})",
            self.mean_e2,
            self.var_e2,
            self.sample_count,
            self.coverage.map_or("None".to_string(), |c| c.to_string())
        )
    }
}

/// An LMS/NLMS identification experiment.
///
/// ```text
/// exp = Experiment(algorithm="nlms", n_taps=64, step=0.1, noise_kind="laplacian")
/// p = exp.predict()
/// stats = exp.ensemble(trials=20, seed=1)
/// ```
#[pyclass(name = "Experiment", module = "securve")]
struct PyExperiment {
    config: ExperimentConfig,
}

#[pymethods]
impl PyExperiment {
    /// `step=None` selects `2 / (30 N input_variance)` for LMS; NLMS requires it.
    #[new]
    #[pyo3(signature = (
        algorithm = "lms",
        n_taps = 64,
        step = None,
        ar1_a = 0.5,
        input_variance = 1.0,
        noise_kind = "gaussian",
        noise_variance = 1e-6,
        echo_decay = 8.0,
        iterations = 40_000,
        burn_in_fraction = 0.5,
        confidence = 0.997,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        algorithm: &str,
        n_taps: usize,
        step: Option<f64>,
        ar1_a: f64,
        input_variance: f64,
        noise_kind: &str,
        noise_variance: f64,
        echo_decay: f64,
        iterations: usize,
        burn_in_fraction: f64,
        confidence: f64,
    ) -> PyResult<Self> {
        let step = match algorithm {
            "lms" => StepSetting::Lms { mu: step },
            "nlms" => StepSetting::Nlms {
                beta: step.ok_or_else(|| PyValueError::new_err("nlms requires `step` (beta)"))?,
                regularizer: None,
            },
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown algorithm `{other}` (expected lms or nlms)"
                )))
            }
        };
        let config = ExperimentConfig {
            step,
            n_taps,
            ar1_a,
            input_variance,
            noise_kind: parse_kind(noise_kind)?,
            noise_variance,
            impulse_response: ImpulseSource::Synthetic { decay: echo_decay },
            iterations,
            burn_in_fraction,
            confidence,
            db: true,
            base_dir: PathBuf::new(),
        };
        config.validate().map_err(value_error)?;
        Ok(Self { config })
    }

    /// Loads a `key = value` config file.
    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let config = ExperimentConfig::load(&path).map_err(value_error)?;
        Ok(Self { config })
    }

    #[staticmethod]
    #[pyo3(signature = (text, base_dir = None))]
    fn from_text(text: &str, base_dir: Option<PathBuf>) -> PyResult<Self> {
        let config = ExperimentConfig::parse(text, Path::new("<string>"), base_dir.unwrap_or_default())
            .map_err(value_error)?;
        Ok(Self { config })
    }

    /// Prediction at `confidence` (defaults to the configured level).
    #[pyo3(signature = (confidence = None))]
    fn predict(&self, confidence: Option<f64>) -> PyResult<PyPrediction> {
        let c = &self.config;
        let signal = c.signal().map_err(value_error)?;
        let filter = c.filter(&signal).map_err(value_error)?;
        let plant = c.plant().map_err(value_error)?;
        securve::predict(&filter, &plant, &signal, Some(confidence.unwrap_or(c.confidence)))
            .map(PyPrediction::from)
            .map_err(value_error)
    }

    /// One realization; returns `(e, e2)` lists.
    fn simulate(&self, py: Python<'_>, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let spec = self.config.experiment(1, seed).map_err(value_error)?;
        let trace = py
            .detach(|| securve::run_trial(&spec, 0))
            .map_err(value_error)?;
        Ok((trace.errors, trace.squared_errors))
    }

    /// Runs `trials` realizations and reports pooled steady-state moments and
    /// the coverage of the predicted bound.
    fn ensemble(&self, py: Python<'_>, trials: usize, seed: u64) -> PyResult<PyEnsembleStats> {
        let spec = self.config.experiment(trials, seed).map_err(value_error)?;
        let bound = {
            let c = &self.config;
            let signal = c.signal().map_err(value_error)?;
            securve::predict(&spec.filter, &spec.plant, &signal, Some(c.confidence))
                .map_err(value_error)?
                .sample_bound()
        };
        let stats = py
            .detach(|| securve::run_trials_with_coverage(&spec, Some(&bound)))
            .map_err(value_error)?;
        Ok(PyEnsembleStats {
            mean_e2: stats.mean_e2,
            mean_e4: stats.mean_e4,
            var_e2: stats.var_e2,
            sample_count: stats.sample_count,
            coverage: stats.coverage,
        })
    }

    /// The configuration in `key = value` form.
    fn to_text(&self) -> String {
        self.config.to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "Experiment(n_taps={}, noise_kind={}, noise_variance={:e})",
            self.config.n_taps, self.config.noise_kind, self.config.noise_variance
        )
    }
}

#[pyfunction]
fn chi2_1_quantile(p: f64) -> PyResult<f64> {
    securve::chi2_1_quantile(p).map_err(value_error)
}

/// `(lower, upper)` equal-tail chi-square (1 dof) interval.
#[pyfunction]
fn equal_tail_interval(confidence: f64) -> PyResult<(f64, f64)> {
    let ci = securve::equal_tail_interval(confidence).map_err(value_error)?;
    Ok((ci.lower, ci.upper))
}

#[pyfunction]
fn gaussian_se_bounds(j_inf: f64, confidence: f64) -> PyResult<(f64, f64)> {
    let ci = securve::gaussian_se_bounds(j_inf, confidence).map_err(value_error)?;
    Ok((ci.lower, ci.upper))
}

#[pyfunction]
fn three_sigma_upper(j_inf: f64, var_e2: f64) -> PyResult<f64> {
    securve::three_sigma_upper(j_inf, var_e2).map_err(value_error)
}

#[pyfunction]
fn theoretical_kurtosis(kind: &str) -> PyResult<f64> {
    Ok(securve::theoretical_kurtosis(parse_kind(kind)?))
}

#[pyfunction]
fn sample_kurtosis(samples: Vec<f64>) -> PyResult<f64> {
    securve::sample_kurtosis(&samples).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (ar1_a, input_variance, length, seed, stream = 0))]
fn gen_ar1(ar1_a: f64, input_variance: f64, length: usize, seed: u64, stream: u64) -> PyResult<Vec<f64>> {
    let spec = SignalSpec::new(ar1_a, input_variance).map_err(value_error)?;
    securve::gen_ar1(&spec, length, RandomStream::new(seed, stream)).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (kind, variance, length, seed, stream = 0))]
fn gen_noise(kind: &str, variance: f64, length: usize, seed: u64, stream: u64) -> PyResult<Vec<f64>> {
    let spec = NoiseSpec::new(parse_kind(kind)?, variance).map_err(value_error)?;
    securve::gen_noise(&spec, length, RandomStream::new(seed, stream)).map_err(value_error)
}

/// AR(1) autocorrelation matrix as a list of rows.
#[pyfunction]
fn ar1_autocorrelation_matrix(ar1_a: f64, variance: f64, n: usize) -> PyResult<Vec<Vec<f64>>> {
    let r = securve::ar1_autocorrelation_matrix(ar1_a, variance, n).map_err(value_error)?;
    let m = r.matrix();
    Ok((0..n).map(|i| m.row(i).iter().copied().collect()).collect())
}

/// Closed-form LMS squared-error variance for an AR(1) input.
#[pyfunction]
fn var_e2_lms(kurtosis: f64, j_min: f64, mu: f64, ar1_a: f64, input_variance: f64, n_taps: usize) -> PyResult<f64> {
    let r = securve::ar1_autocorrelation_matrix(ar1_a, input_variance, n_taps).map_err(value_error)?;
    securve::var_e2_lms(kurtosis, j_min, mu, &r).map_err(value_error)
}

/// Closed-form LMS steady-state MSE for an AR(1) input.
#[pyfunction]
fn steady_state_mse(mu: f64, j_min: f64, ar1_a: f64, input_variance: f64, n_taps: usize) -> PyResult<f64> {
    let r = securve::ar1_autocorrelation_matrix(ar1_a, input_variance, n_taps).map_err(value_error)?;
    securve::steady_state_mse(mu, j_min, &r).map_err(value_error)
}

#[pyfunction]
fn default_lms_step(n_taps: usize, input_variance: f64) -> PyResult<f64> {
    securve::default_lms_step(n_taps, input_variance).map_err(value_error)
}

#[pyfunction]
fn effective_step(beta: f64, n_taps: usize, input_variance: f64) -> PyResult<f64> {
    securve::effective_step(beta, n_taps, input_variance).map_err(value_error)
}

#[pymodule]
#[pyo3(name = "securve")]
fn securve_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExperiment>()?;
    m.add_class::<PyPrediction>()?;
    m.add_class::<PyEnsembleStats>()?;
    m.add_function(wrap_pyfunction!(chi2_1_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(equal_tail_interval, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_se_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(three_sigma_upper, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_kurtosis, m)?)?;
    m.add_function(wrap_pyfunction!(sample_kurtosis, m)?)?;
    m.add_function(wrap_pyfunction!(gen_ar1, m)?)?;
    m.add_function(wrap_pyfunction!(gen_noise, m)?)?;
    m.add_function(wrap_pyfunction!(ar1_autocorrelation_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(var_e2_lms, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state_mse, m)?)?;
    m.add_function(wrap_pyfunction!(default_lms_step, m)?)?;
    m.add_function(wrap_pyfunction!(effective_step, m)?)?;
    Ok(())
}
