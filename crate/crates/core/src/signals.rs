//! Input and noise generators with their exact second- and fourth-order
//! statistics.
//!
//! The input is a stationary first-order autoregressive process; the additive
//! noise is white with one of four marginal distributions, each scaled to a
//! requested variance.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::summation::NeumaierSum;

/// Stationary AR(1) input: `x[n] = a x[n-1] + sqrt(var (1 - a^2)) g[n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSpec {
    pub ar1_coefficient: f64,
    pub input_variance: f64,
}

impl SignalSpec {
    pub fn new(ar1_coefficient: f64, input_variance: f64) -> Result<Self> {
        let spec = Self {
            ar1_coefficient,
            input_variance,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        validate_ar1(self.ar1_coefficient)?;
        ensure_positive("input_variance", self.input_variance)
    }
}

fn validate_ar1(a: f64) -> Result<()> {
    if a.abs() < 1.0 {
        Ok(())
    } else {
        Err(invalid("ar1_coefficient", a, "|a| must be below 1"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Gaussian,
    Uniform,
    Laplacian,
    /// Fifth power of a standard Gaussian, rescaled.
    GaussianPower,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [
        NoiseKind::Gaussian,
        NoiseKind::Uniform,
        NoiseKind::Laplacian,
        NoiseKind::GaussianPower,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Uniform => "uniform",
            NoiseKind::Laplacian => "laplacian",
            NoiseKind::GaussianPower => "gaussian_power",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                format!("unknown noise kind `{s}` (expected gaussian, uniform, laplacian or gaussian_power)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub variance: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, variance: f64) -> Result<Self> {
        ensure_positive("noise_variance", variance)?;
        Ok(Self { kind, variance })
    }

    pub fn kurtosis(&self) -> f64 {
        theoretical_kurtosis(self.kind)
    }
}

/// A reproducible random substream.
///
/// Each `(master_seed, stream_index)` pair selects one of the 2^64 ChaCha
/// streams under the same key, so distinct indices never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RandomStream {
    pub const fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Symmetric positive-definite input autocorrelation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrMatrix(DMatrix<f64>);

impl AutocorrMatrix {
    /// Wraps a matrix after checking it is square, exactly symmetric and
    /// positive definite.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(invalid("n", 0.0, "matrix must be at least 1x1"));
        }
        if m != m.transpose() {
            return Err(Error::Degenerate("autocorrelation matrix is not symmetric"));
        }
        if m.iter().any(|v| !v.is_finite()) || m.clone().cholesky().is_none() {
            return Err(Error::Degenerate(
                "autocorrelation matrix is not positive definite",
            ));
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().sum::<NeumaierSum>().value()
    }

    /// `trace(R^2)`, which for symmetric `R` is the sum of squared entries.
    pub fn trace_of_square(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<NeumaierSum>().value()
    }

    pub fn is_toeplitz(&self) -> bool {
        let n = self.dim();
        (1..n).all(|i| (1..n).all(|j| self.0[(i, j)] == self.0[(i - 1, j - 1)]))
    }
}

/// `[R]_ij = variance * a^|i-j|`.
pub fn ar1_autocorrelation_matrix(a: f64, variance: f64, n: usize) -> Result<AutocorrMatrix> {
    validate_ar1(a)?;
    ensure_positive("input_variance", variance)?;
    if n == 0 {
        return Err(invalid("n_taps", 0.0, "must be at least 1"));
    }
    let lags: Vec<f64> = (0..n).map(|k| variance * a.powi(k as i32)).collect();
    let m = DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]);
    Ok(AutocorrMatrix(m))
}

pub fn gen_ar1(spec: &SignalSpec, length: usize, stream: RandomStream) -> Result<Vec<f64>> {
    spec.validate()?;
    if length == 0 {
        return Err(invalid("length", 0.0, "must be at least 1"));
    }
    let a = spec.ar1_coefficient;
    let sigma = spec.input_variance.sqrt();
    let innovation = (spec.input_variance * (1.0 - a * a)).sqrt();
    let mut rng = stream.rng();

    let mut out = Vec::with_capacity(length);
    let first: f64 = rng.sample(StandardNormal);
    let mut prev = sigma * first;
    out.push(prev);
    for _ in 1..length {
        let g: f64 = rng.sample(StandardNormal);
        prev = a * prev + innovation * g;
        out.push(prev);
    }
    Ok(out)
}

pub fn gen_noise(spec: &NoiseSpec, length: usize, stream: RandomStream) -> Result<Vec<f64>> {
    ensure_positive("noise_variance", spec.variance)?;
    if length == 0 {
        return Err(invalid("length", 0.0, "must be at least 1"));
    }
    let var = spec.variance;
    let mut rng = stream.rng();
    let out = match spec.kind {
        NoiseKind::Gaussian => {
            let sigma = var.sqrt();
            (0..length)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
        NoiseKind::Uniform => {
            let half_width = (3.0 * var).sqrt();
            (0..length)
                .map(|_| uniform_from_unit(rng.sample(Open01), half_width))
                .collect()
        }
        NoiseKind::Laplacian => {
            let scale = (var / 2.0).sqrt();
            (0..length)
                .map(|_| laplacian_from_uniform(rng.sample(Open01), scale))
                .collect()
        }
        NoiseKind::GaussianPower => (0..length)
            .map(|_| gaussian_power_from_normal(rng.sample(StandardNormal), var))
            .collect(),
    };
    Ok(out)
}

/// Maps `u` in (0, 1) onto `[-half_width, half_width]`.
#[inline]
pub fn uniform_from_unit(u: f64, half_width: f64) -> f64 {
    half_width * (2.0 * u - 1.0)
}

/// Inverse CDF of a zero-mean Laplacian with scale `b`, evaluated at `u` in (0, 1).
#[inline]
pub fn laplacian_from_uniform(u: f64, scale: f64) -> f64 {
    let centered = u - 0.5;
    -scale * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// `u^5 sqrt(variance / 945)`; 945 = E{u^10} for standard Gaussian `u`.
#[inline]
pub fn gaussian_power_from_normal(u: f64, variance: f64) -> f64 {
    let u2 = u * u;
    u2 * u2 * u * (variance / 945.0).sqrt()
}

/// Zero-mean kurtosis `mean(x^4) / mean(x^2)^2`.
pub fn sample_kurtosis(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(invalid(
            "samples",
            samples.len() as f64,
            "need at least 2 samples",
        ));
    }
    let mut m2 = NeumaierSum::new();
    let mut m4 = NeumaierSum::new();
    for &x in samples {
        let x2 = x * x;
        m2 += x2;
        m4 += x2 * x2;
    }
    let n = samples.len() as f64;
    let m2 = m2.value() / n;
    if m2 == 0.0 {
        return Err(Error::Degenerate("kurtosis of an all-zero sequence"));
    }
    Ok((m4.value() / n) / (m2 * m2))
}

fn double_factorial(n: u32) -> f64 {
    (1..=n).rev().step_by(2).map(f64::from).product()
}

pub fn theoretical_kurtosis(kind: NoiseKind) -> f64 {
    match kind {
        NoiseKind::Gaussian => 3.0,
        NoiseKind::Uniform => 9.0 / 5.0,
        NoiseKind::Laplacian => 6.0,
        // E{u^20} / E{u^10}^2 = 19!! / (9!!)^2
        NoiseKind::GaussianPower => double_factorial(19) / double_factorial(9).powi(2),
    }
}
