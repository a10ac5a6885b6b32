//! LMS and NLMS system identification against a known FIR plant.

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::signals::NoiseSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    Lms { step: f64 },
    Nlms { step: f64, regularizer: f64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Lms { .. } => "lms",
            Algorithm::Nlms { .. } => "nlms",
        }
    }

    pub fn step(&self) -> f64 {
        match *self {
            Algorithm::Lms { step } | Algorithm::Nlms { step, .. } => step,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Algorithm::Lms { step } => ensure_positive("mu", step),
            Algorithm::Nlms { step, regularizer } => {
                if !(step > 0.0 && step < 2.0) {
                    return Err(invalid("beta", step, "must lie in (0, 2)"));
                }
                if !(regularizer >= 0.0 && regularizer.is_finite()) {
                    return Err(invalid("regularizer", regularizer, "must be >= 0"));
                }
                Ok(())
            }
        }
    }
}

/// NLMS regularizer used when none is given: `1e-10 * N * input_variance`.
pub fn default_regularizer(n_taps: usize, input_variance: f64) -> f64 {
    1e-10 * n_taps as f64 * input_variance
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub n_taps: usize,
    pub algorithm: Algorithm,
    pub initial_weights: Vec<f64>,
}

impl FilterSpec {
    pub fn lms(n_taps: usize, step: f64) -> Result<Self> {
        Self::new(n_taps, Algorithm::Lms { step }, vec![0.0; n_taps])
    }

    pub fn nlms(n_taps: usize, step: f64, regularizer: f64) -> Result<Self> {
        Self::new(
            n_taps,
            Algorithm::Nlms { step, regularizer },
            vec![0.0; n_taps],
        )
    }

    pub fn new(n_taps: usize, algorithm: Algorithm, initial_weights: Vec<f64>) -> Result<Self> {
        let spec = Self {
            n_taps,
            algorithm,
            initial_weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_taps == 0 {
            return Err(invalid("n_taps", 0.0, "must be at least 1"));
        }
        if self.initial_weights.len() != self.n_taps {
            return Err(Error::DimensionMismatch {
                expected: self.n_taps,
                found: self.initial_weights.len(),
            });
        }
        self.algorithm.validate()
    }
}

/// The unknown system: `d[n] = x[n]^T h + r[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub impulse_response: Vec<f64>,
    pub noise: NoiseSpec,
}

/// Error sample curve of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub errors: Vec<f64>,
    pub squared_errors: Vec<f64>,
    pub iterations: usize,
    pub final_weights: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs the adaptive filter over `input`, identifying `plant` with additive
/// `noise`. The regressor is `[x[n], x[n-1], ..., x[n-N+1]]` with zeros
/// before the first sample.
pub fn simulate(
    plant: &PlantSpec,
    filter: &FilterSpec,
    input: &[f64],
    noise: &[f64],
) -> Result<Trace> {
    filter.validate()?;
    if plant.impulse_response.len() != filter.n_taps {
        return Err(Error::DimensionMismatch {
            expected: filter.n_taps,
            found: plant.impulse_response.len(),
        });
    }
    if input.len() != noise.len() {
        return Err(Error::LengthMismatch {
            input: input.len(),
            noise: noise.len(),
        });
    }
    if input.is_empty() {
        return Err(invalid("length", 0.0, "must be at least 1"));
    }

    let n_taps = filter.n_taps;
    let h = &plant.impulse_response;
    let mut w = filter.initial_weights.clone();
    let mut regressor = vec![0.0; n_taps];
    let mut errors = Vec::with_capacity(input.len());
    let mut squared_errors = Vec::with_capacity(input.len());

    for (n, (&x, &r)) in input.iter().zip(noise).enumerate() {
        regressor.copy_within(0..n_taps - 1, 1);
        regressor[0] = x;

        let desired = dot(&regressor, h) + r;
        let e = desired - dot(&regressor, &w);

        let gain = match filter.algorithm {
            Algorithm::Lms { step } => step * e,
            Algorithm::Nlms { step, regularizer } => {
                let energy = dot(&regressor, &regressor) + regularizer;
                if energy == 0.0 {
                    if e == 0.0 {
                        0.0
                    } else {
                        return Err(Error::DegenerateUpdate { index: n });
                    }
                } else {
                    step * e / energy
                }
            }
        };
        for (wk, xk) in w.iter_mut().zip(&regressor) {
            *wk += gain * xk;
        }

        errors.push(e);
        squared_errors.push(e * e);
    }

    Ok(Trace {
        iterations: errors.len(),
        errors,
        squared_errors,
        final_weights: w,
    })
}

/// LMS step that NLMS with normalized step `beta` approximates for long
/// filters: `beta / (N * input_variance)`.
pub fn effective_step(beta: f64, n_taps: usize, input_variance: f64) -> Result<f64> {
    ensure_positive("beta", beta)?;
    ensure_positive("n_taps", n_taps as f64)?;
    ensure_positive("input_variance", input_variance)?;
    Ok(beta / (n_taps as f64 * input_variance))
}

/// The reference LMS step `2 / (30 * input_variance * N)`.
pub fn default_lms_step(n_taps: usize, input_variance: f64) -> Result<f64> {
    ensure_positive("n_taps", n_taps as f64)?;
    ensure_positive("input_variance", input_variance)?;
    Ok(2.0 / (30.0 * input_variance * n_taps as f64))
}
