//! Closed-form steady-state statistics of the squared error.
//!
//! With `K` the steady-state weight-error covariance and `R` the input
//! autocorrelation matrix, the fourth moment of the error is
//!
//! ```text
//! E{e^4} = psi Jmin^2 + 6 Jmin tr(KR) + 3 tr(KR)^2 + 6 tr(RKRK)
//! ```
//!
//! and, since `J(inf) = Jmin + tr(KR)`, the squared-error variance is
//!
//! ```text
//! var{e^2} = (psi - 1) Jmin^2 + 4 Jmin tr(KR) + 2 tr(KR)^2 + 6 tr(RKRK)
//! ```
//!
//! For small-step LMS, `K = (mu Jmin / 2) I`, which gives
//! `J(inf) = Jmin (1 + mu tr(R) / 2)` and
//! `var{e^2} = Jmin^2 [(psi - 1) + 2 mu tr(R) + mu^2 (tr(R)^2 + 3 tr(R^2)) / 2]`.
//! NLMS with normalized step `beta` is predicted through the LMS formulas with
//! `mu = beta / (N var_x)`.

use nalgebra::DMatrix;

use crate::bounds::{gaussian_se_bounds, three_sigma_upper, ConfidenceInterval};
use crate::error::{ensure_positive, invalid, Error, Result};
use crate::filters::{effective_step, Algorithm, FilterSpec, PlantSpec};
use crate::signals::{ar1_autocorrelation_matrix, AutocorrMatrix, NoiseKind, SignalSpec};
use crate::summation::NeumaierSum;

/// Above this value of `mu tr(R)` the diagonal covariance approximation is
/// no longer a small-step regime.
pub const SMALL_STEP_LIMIT: f64 = 0.2;

/// Steady-state weight-error covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum CovMatrix {
    ScaledIdentity { dim: usize, scale: f64 },
    Dense(DMatrix<f64>),
}

impl CovMatrix {
    /// Wraps a dense matrix after checking it is symmetric and positive
    /// semidefinite.
    pub fn dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m != m.transpose() {
            return Err(Error::Degenerate("covariance matrix is not symmetric"));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let min_eig = m.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-12 * scale * m.nrows() as f64 {
            return Err(Error::Degenerate(
                "covariance matrix is not positive semidefinite",
            ));
        }
        Ok(CovMatrix::Dense(m))
    }

    pub fn dim(&self) -> usize {
        match self {
            CovMatrix::ScaledIdentity { dim, .. } => *dim,
            CovMatrix::Dense(m) => m.nrows(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            CovMatrix::ScaledIdentity { dim, scale } => DMatrix::identity(*dim, *dim) * *scale,
            CovMatrix::Dense(m) => m.clone(),
        }
    }

    fn check_against(&self, r: &AutocorrMatrix) -> Result<()> {
        if self.dim() != r.dim() {
            return Err(Error::DimensionMismatch {
                expected: r.dim(),
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// `tr(K R)`.
pub fn trace_kr(k: &CovMatrix, r: &AutocorrMatrix) -> Result<f64> {
    k.check_against(r)?;
    Ok(match k {
        CovMatrix::ScaledIdentity { scale, .. } => scale * r.trace(),
        CovMatrix::Dense(km) => {
            let rm = r.matrix();
            // tr(KR) = sum_ij K_ij R_ji
            km.iter()
                .zip(rm.transpose().iter())
                .map(|(a, b)| a * b)
                .sum::<NeumaierSum>()
                .value()
        }
    })
}

/// `tr(R K R K)`.
pub fn trace_rkrk(k: &CovMatrix, r: &AutocorrMatrix) -> Result<f64> {
    k.check_against(r)?;
    Ok(match k {
        CovMatrix::ScaledIdentity { scale, .. } => scale * scale * r.trace_of_square(),
        CovMatrix::Dense(km) => {
            let m = r.matrix() * km;
            // tr(M M) = sum_ij M_ij M_ji
            m.iter()
                .zip(m.transpose().iter())
                .map(|(a, b)| a * b)
                .sum::<NeumaierSum>()
                .value()
        }
    })
}

fn validate_kurtosis(psi: f64) -> Result<()> {
    if psi >= 1.0 && psi.is_finite() {
        Ok(())
    } else {
        Err(invalid("kurtosis", psi, "must be finite and >= 1"))
    }
}

/// Small-step LMS covariance `(mu Jmin / 2) I`.
pub fn weight_error_cov_lms(mu: f64, j_min: f64, n_taps: usize) -> Result<CovMatrix> {
    ensure_positive("mu", mu)?;
    ensure_positive("j_min", j_min)?;
    if n_taps == 0 {
        return Err(invalid("n_taps", 0.0, "must be at least 1"));
    }
    Ok(CovMatrix::ScaledIdentity {
        dim: n_taps,
        scale: 0.5 * mu * j_min,
    })
}

/// `Jmin (1 + mu tr(R) / 2)`.
pub fn steady_state_mse(mu: f64, j_min: f64, r: &AutocorrMatrix) -> Result<f64> {
    ensure_positive("mu", mu)?;
    ensure_positive("j_min", j_min)?;
    Ok(j_min * (1.0 + 0.5 * mu * r.trace()))
}

/// Steady-state `E{e^4}` for a general weight-error covariance.
pub fn fourth_moment(kurtosis: f64, j_min: f64, k: &CovMatrix, r: &AutocorrMatrix) -> Result<f64> {
    validate_kurtosis(kurtosis)?;
    ensure_positive("j_min", j_min)?;
    let tkr = trace_kr(k, r)?;
    let trkrk = trace_rkrk(k, r)?;
    Ok(j_min * j_min * kurtosis + 6.0 * j_min * tkr + 3.0 * tkr * tkr + 6.0 * trkrk)
}

/// Steady-state variance of `e^2` for a general weight-error covariance.
pub fn var_e2_general(
    kurtosis: f64,
    j_min: f64,
    k: &CovMatrix,
    r: &AutocorrMatrix,
) -> Result<f64> {
    validate_kurtosis(kurtosis)?;
    ensure_positive("j_min", j_min)?;
    let tkr = trace_kr(k, r)?;
    let trkrk = trace_rkrk(k, r)?;
    Ok((kurtosis - 1.0) * j_min * j_min + 4.0 * j_min * tkr + 2.0 * tkr * tkr + 6.0 * trkrk)
}

/// Gaussian-noise special case `2 J(inf)^2 + 6 tr(RKRK)`.
pub fn var_e2_gaussian(j_inf: f64, k: &CovMatrix, r: &AutocorrMatrix) -> Result<f64> {
    ensure_positive("j_inf", j_inf)?;
    Ok(2.0 * j_inf * j_inf + 6.0 * trace_rkrk(k, r)?)
}

/// Closed-form LMS variance of the steady-state squared error.
pub fn var_e2_lms(kurtosis: f64, j_min: f64, mu: f64, r: &AutocorrMatrix) -> Result<f64> {
    validate_kurtosis(kurtosis)?;
    ensure_positive("j_min", j_min)?;
    ensure_positive("mu", mu)?;
    let tr = r.trace();
    let tr2 = r.trace_of_square();
    let bracket = (kurtosis - 1.0) + 2.0 * mu * tr + 0.5 * mu * mu * (tr * tr + 3.0 * tr2);
    Ok(j_min * j_min * bracket)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub j_min: f64,
    pub j_inf: f64,
    pub e4_inf: f64,
    pub var_e2_inf: f64,
    /// LMS step actually used by the model (NLMS mapped to `beta / (N var_x)`).
    pub effective_mu: f64,
    pub kurtosis: f64,
    pub noise_kind: NoiseKind,
    /// `effective_mu * tr(R)` exceeded [`SMALL_STEP_LIMIT`].
    pub small_step_stressed: bool,
    /// Equal-tail chi-square interval; only for Gaussian noise.
    pub gaussian_interval: Option<ConfidenceInterval>,
    pub three_sigma_upper: f64,
}

impl Prediction {
    pub fn sigma_e2(&self) -> f64 {
        self.var_e2_inf.sqrt()
    }

    /// The bound appropriate to the noise: the chi-square interval for
    /// Gaussian noise, otherwise `[0, J(inf) + 3 sigma]`.
    pub fn sample_bound(&self) -> ConfidenceInterval {
        self.gaussian_interval.unwrap_or(ConfidenceInterval {
            confidence: f64::NAN,
            lower: 0.0,
            upper: self.three_sigma_upper,
        })
    }
}

pub fn model_step(filter: &FilterSpec, signal: &SignalSpec) -> Result<f64> {
    match filter.algorithm {
        Algorithm::Lms { step } => Ok(step),
        Algorithm::Nlms { step, .. } => effective_step(step, filter.n_taps, signal.input_variance),
    }
}

/// Steady-state prediction for a filter/plant/input triple.
///
/// Internally everything is computed with `Jmin = 1` and rescaled, so tiny
/// noise powers never produce underflow-adjacent intermediates.
pub fn predict(
    filter: &FilterSpec,
    plant: &PlantSpec,
    signal: &SignalSpec,
    confidence: Option<f64>,
) -> Result<Prediction> {
    filter.validate()?;
    signal.validate()?;
    ensure_positive("noise_variance", plant.noise.variance)?;
    if plant.impulse_response.len() != filter.n_taps {
        return Err(Error::DimensionMismatch {
            expected: filter.n_taps,
            found: plant.impulse_response.len(),
        });
    }

    let j_min = plant.noise.variance;
    let kurtosis = plant.noise.kurtosis();
    let mu = model_step(filter, signal)?;
    let r = ar1_autocorrelation_matrix(signal.ar1_coefficient, signal.input_variance, filter.n_taps)?;

    let load = mu * r.trace();
    let small_step_stressed = load > SMALL_STEP_LIMIT;
    if small_step_stressed {
        log::warn!(
            "mu * tr(R) = {load:.3} exceeds {SMALL_STEP_LIMIT}; small-step covariance model is stressed"
        );
    }

    let j_inf = steady_state_mse(mu, 1.0, &r)? * j_min;
    let var_e2_inf = var_e2_lms(kurtosis, 1.0, mu, &r)? * j_min * j_min;
    let e4_inf = var_e2_inf + j_inf * j_inf;

    let gaussian_interval = match (plant.noise.kind, confidence) {
        (NoiseKind::Gaussian, Some(c)) => Some(gaussian_se_bounds(j_inf, c)?),
        (_, Some(c)) if !(c > 0.0 && c < 1.0) => {
            return Err(invalid("confidence", c, "must lie in (0, 1)"))
        }
        _ => None,
    };

    Ok(Prediction {
        j_min,
        j_inf,
        e4_inf,
        var_e2_inf,
        effective_mu: mu,
        kurtosis,
        noise_kind: plant.noise.kind,
        small_step_stressed,
        gaussian_interval,
        three_sigma_upper: three_sigma_upper(j_inf, var_e2_inf)?,
    })
}
