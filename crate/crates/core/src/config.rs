//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # Gaussian noise, AR(1) input
//! algorithm        = nlms
//! n_taps           = 64
//! beta             = 0.1
//! ar1_a            = 0.5
//! input_variance   = 1
//! noise_kind       = gaussian
//! noise_variance   = 1e-6
//! impulse_response = synthetic:8
//! iterations       = 80000
//! burn_in_fraction = 0.5
//! confidence       = 0.997
//! ```
//!
//! `mu = auto` selects the reference LMS step `2 / (30 var_x N)`. Impulse
//! response paths are resolved relative to the config file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ensemble::{steady_window, ExperimentSpec, DEFAULT_BURN_IN};
use crate::error::{Error, Result};
use crate::filters::{
    default_lms_step, default_regularizer, FilterSpec, PlantSpec,
};
use crate::io::{load_impulse_response, synthetic_echo_path};
use crate::signals::{NoiseKind, NoiseSpec, SignalSpec};

pub const DEFAULT_ITERATIONS: usize = 40_000;
pub const DEFAULT_CONFIDENCE: f64 = 0.997;

const KEYS: &[&str] = &[
    "algorithm",
    "n_taps",
    "mu",
    "beta",
    "regularizer",
    "ar1_a",
    "input_variance",
    "noise_kind",
    "noise_variance",
    "impulse_response",
    "iterations",
    "burn_in_fraction",
    "confidence",
    "db",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSetting {
    Lms { mu: Option<f64> },
    Nlms { beta: f64, regularizer: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImpulseSource {
    File(PathBuf),
    Synthetic { decay: f64 },
}

impl fmt::Display for ImpulseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImpulseSource::File(p) => write!(f, "{}", p.display()),
            ImpulseSource::Synthetic { decay } => write!(f, "synthetic:{decay}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub step: StepSetting,
    pub n_taps: usize,
    pub ar1_a: f64,
    pub input_variance: f64,
    pub noise_kind: NoiseKind,
    pub noise_variance: f64,
    pub impulse_response: ImpulseSource,
    pub iterations: usize,
    pub burn_in_fraction: f64,
    pub confidence: f64,
    pub db: bool,
    /// Directory that relative impulse-response paths are resolved against.
    pub base_dir: PathBuf,
}

struct Entry {
    line: usize,
    value: String,
}

struct Parser<'a> {
    path: &'a Path,
    entries: BTreeMap<String, Entry>,
}

impl Parser<'_> {
    fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn required(&mut self, key: &str) -> Result<Entry> {
        self.take(key).ok_or_else(|| Error::Config {
            path: self.path.to_path_buf(),
            message: format!("missing required key `{key}`"),
        })
    }

    fn value<T: std::str::FromStr>(&self, key: &str, entry: &Entry) -> Result<T> {
        entry.value.parse().map_err(|_| {
            self.error(
                entry.line,
                format!("invalid value `{}` for `{key}`", entry.value),
            )
        })
    }

    fn real(&self, key: &str, entry: &Entry) -> Result<f64> {
        let v: f64 = self.value(key, entry)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.error(entry.line, format!("`{key}` must be finite")))
        }
    }

    fn optional_real(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            Some(e) => self.real(key, &e).map(Some),
            None => Ok(None),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Self::parse(&text, path, base_dir)
    }

    /// Parses config text; `origin` is used in diagnostics only.
    pub fn parse(text: &str, origin: &Path, base_dir: PathBuf) -> Result<Self> {
        let mut p = Parser {
            path: origin,
            entries: BTreeMap::new(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| p.error(line, format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(p.error(line, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(p.error(line, format!("empty value for `{key}`")));
            }
            if let Some(prev) = p.entries.get(key) {
                return Err(p.error(
                    line,
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
            p.entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.to_string(),
                },
            );
        }

        let algorithm = p.required("algorithm")?;
        let step = match algorithm.value.as_str() {
            "lms" => {
                if let Some(e) = p.take("beta").or_else(|| p.take("regularizer")) {
                    return Err(p.error(e.line, "`beta`/`regularizer` apply to nlms only"));
                }
                let mu = p.required("mu")?;
                let mu = if mu.value == "auto" {
                    None
                } else {
                    Some(p.real("mu", &mu)?)
                };
                StepSetting::Lms { mu }
            }
            "nlms" => {
                if let Some(e) = p.take("mu") {
                    return Err(p.error(e.line, "`mu` applies to lms only; use `beta`"));
                }
                let beta = p.required("beta")?;
                let beta = p.real("beta", &beta)?;
                StepSetting::Nlms {
                    beta,
                    regularizer: p.optional_real("regularizer")?,
                }
            }
            other => {
                return Err(p.error(
                    algorithm.line,
                    format!("unknown algorithm `{other}` (expected lms or nlms)"),
                ))
            }
        };

        let e = p.required("n_taps")?;
        let n_taps: usize = p.value("n_taps", &e)?;
        let e = p.required("ar1_a")?;
        let ar1_a = p.real("ar1_a", &e)?;
        let e = p.required("input_variance")?;
        let input_variance = p.real("input_variance", &e)?;
        let e = p.required("noise_kind")?;
        let noise_kind: NoiseKind = e.value.parse().map_err(|m: String| p.error(e.line, m))?;
        let e = p.required("noise_variance")?;
        let noise_variance = p.real("noise_variance", &e)?;

        let e = p.required("impulse_response")?;
        let impulse_response = match e.value.strip_prefix("synthetic:") {
            Some(decay) => ImpulseSource::Synthetic {
                decay: decay.trim().parse().map_err(|_| {
                    p.error(e.line, format!("invalid synthetic decay `{decay}`"))
                })?,
            },
            None => ImpulseSource::File(PathBuf::from(&e.value)),
        };

        let iterations = match p.take("iterations") {
            Some(e) => p.value("iterations", &e)?,
            None => DEFAULT_ITERATIONS,
        };
        let burn_in_fraction = p.optional_real("burn_in_fraction")?.unwrap_or(DEFAULT_BURN_IN);
        let confidence = p.optional_real("confidence")?.unwrap_or(DEFAULT_CONFIDENCE);
        let db = match p.take("db") {
            Some(e) => p.value("db", &e)?,
            None => true,
        };
        debug_assert!(p.entries.is_empty());

        let config = Self {
            step,
            n_taps,
            ar1_a,
            input_variance,
            noise_kind,
            noise_variance,
            impulse_response,
            iterations,
            burn_in_fraction,
            confidence,
            db,
            base_dir,
        };
        config.validate().map_err(|err| Error::Config {
            path: origin.to_path_buf(),
            message: err.to_string(),
        })?;
        Ok(config)
    }

    /// Checks every parameter without touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        let signal = self.signal()?;
        self.noise()?;
        self.filter(&signal)?;
        if let ImpulseSource::Synthetic { decay } = self.impulse_response {
            synthetic_echo_path(1, decay)?;
        }
        if self.iterations < 10 {
            return Err(crate::error::invalid(
                "iterations",
                self.iterations as f64,
                "must be at least 10",
            ));
        }
        steady_window(self.iterations, self.burn_in_fraction)?;
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(crate::error::invalid(
                "confidence",
                self.confidence,
                "must lie in (0, 1)",
            ));
        }
        Ok(())
    }

    pub fn signal(&self) -> Result<SignalSpec> {
        SignalSpec::new(self.ar1_a, self.input_variance)
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(self.noise_kind, self.noise_variance)
    }

    pub fn filter(&self, signal: &SignalSpec) -> Result<FilterSpec> {
        match self.step {
            StepSetting::Lms { mu } => {
                let mu = match mu {
                    Some(mu) => mu,
                    None => default_lms_step(self.n_taps, signal.input_variance)?,
                };
                FilterSpec::lms(self.n_taps, mu)
            }
            StepSetting::Nlms { beta, regularizer } => FilterSpec::nlms(
                self.n_taps,
                beta,
                regularizer
                    .unwrap_or_else(|| default_regularizer(self.n_taps, signal.input_variance)),
            ),
        }
    }

    pub fn impulse_response(&self) -> Result<Vec<f64>> {
        let h = match &self.impulse_response {
            ImpulseSource::Synthetic { decay } => synthetic_echo_path(self.n_taps, *decay)?,
            ImpulseSource::File(p) => load_impulse_response(self.base_dir.join(p))?,
        };
        if h.len() != self.n_taps {
            return Err(Error::DimensionMismatch {
                expected: self.n_taps,
                found: h.len(),
            });
        }
        Ok(h)
    }

    pub fn plant(&self) -> Result<PlantSpec> {
        Ok(PlantSpec {
            impulse_response: self.impulse_response()?,
            noise: self.noise()?,
        })
    }

    pub fn experiment(&self, trials: usize, master_seed: u64) -> Result<ExperimentSpec> {
        let signal = self.signal()?;
        let spec = ExperimentSpec {
            filter: self.filter(&signal)?,
            plant: self.plant()?,
            signal,
            iterations: self.iterations,
            burn_in_fraction: self.burn_in_fraction,
            trials,
            master_seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            StepSetting::Lms { mu } => {
                writeln!(f, "algorithm = lms")?;
                match mu {
                    Some(mu) => writeln!(f, "mu = {mu:e}")?,
                    None => writeln!(f, "mu = auto")?,
                }
            }
            StepSetting::Nlms { beta, regularizer } => {
                writeln!(f, "algorithm = nlms")?;
                writeln!(f, "beta = {beta:e}")?;
                if let Some(delta) = regularizer {
                    writeln!(f, "regularizer = {delta:e}")?;
                }
            }
        }
        writeln!(f, "n_taps = {}", self.n_taps)?;
        writeln!(f, "ar1_a = {:e}", self.ar1_a)?;
        writeln!(f, "input_variance = {:e}", self.input_variance)?;
        writeln!(f, "noise_kind = {}", self.noise_kind)?;
        writeln!(f, "noise_variance = {:e}", self.noise_variance)?;
        writeln!(f, "impulse_response = {}", self.impulse_response)?;
        writeln!(f, "iterations = {}", self.iterations)?;
        writeln!(f, "burn_in_fraction = {:e}", self.burn_in_fraction)?;
        writeln!(f, "confidence = {:e}", self.confidence)?;
        writeln!(f, "db = {}", self.db)
    }
}
