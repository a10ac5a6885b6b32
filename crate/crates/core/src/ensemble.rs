//! Monte Carlo ensembles of independent filter realizations.
//!
//! Trial `t` draws its input from substream `2t` and its noise from substream
//! `2t + 1` of the master seed, so every trial is a pure function of the
//! experiment. Trials run in parallel; their partial sums are reduced in trial
//! order, which makes the result independent of scheduling and thread count.

use std::fmt;
use std::ops::Range;

use rayon::prelude::*;

use crate::bounds::ConfidenceInterval;
use crate::error::{invalid, Error, Result};
use crate::filters::{simulate, FilterSpec, PlantSpec, Trace};
use crate::model::Prediction;
use crate::signals::{gen_ar1, gen_noise, RandomStream, SignalSpec};
use crate::summation::NeumaierSum;

pub const DEFAULT_BURN_IN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub signal: SignalSpec,
    pub plant: PlantSpec,
    pub filter: FilterSpec,
    pub iterations: usize,
    pub burn_in_fraction: f64,
    pub trials: usize,
    pub master_seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        self.filter.validate()?;
        if self.plant.impulse_response.len() != self.filter.n_taps {
            return Err(Error::DimensionMismatch {
                expected: self.filter.n_taps,
                found: self.plant.impulse_response.len(),
            });
        }
        if self.iterations < 10 {
            return Err(invalid(
                "iterations",
                self.iterations as f64,
                "must be at least 10",
            ));
        }
        if self.trials == 0 {
            return Err(invalid("trials", 0.0, "must be at least 1"));
        }
        steady_window(self.iterations, self.burn_in_fraction).map(|_| ())
    }

    pub fn window(&self) -> Result<Range<usize>> {
        steady_window(self.iterations, self.burn_in_fraction)
    }

    fn streams(&self, trial: usize) -> (RandomStream, RandomStream) {
        let base = 2 * trial as u64;
        (
            RandomStream::new(self.master_seed, base),
            RandomStream::new(self.master_seed, base + 1),
        )
    }
}

/// `[ceil(iterations * burn_in_fraction), iterations)`.
pub fn steady_window(iterations: usize, burn_in_fraction: f64) -> Result<Range<usize>> {
    if !(burn_in_fraction > 0.0 && burn_in_fraction < 1.0) {
        return Err(invalid(
            "burn_in_fraction",
            burn_in_fraction,
            "must lie in (0, 1)",
        ));
    }
    let start = (iterations as f64 * burn_in_fraction).ceil() as usize;
    if start >= iterations {
        return Err(Error::EmptyWindow);
    }
    Ok(start..iterations)
}

/// Simulates trial `trial` of the experiment.
pub fn run_trial(spec: &ExperimentSpec, trial: usize) -> Result<Trace> {
    let (input_stream, noise_stream) = spec.streams(trial);
    let input = gen_ar1(&spec.signal, spec.iterations, input_stream)?;
    let noise = gen_noise(&spec.plant.noise, spec.iterations, noise_stream)?;
    let trace = simulate(&spec.plant, &spec.filter, &input, &noise)?;
    if let Some(index) = trace.errors.iter().position(|e| !e.is_finite()) {
        return Err(Error::Diverged { trial, index });
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleStats {
    pub mean_e2: f64,
    pub mean_e4: f64,
    pub var_e2: f64,
    pub sample_count: usize,
    pub coverage: Option<f64>,
}

#[derive(Debug, Default, Clone)]
struct TrialMoments {
    z2: NeumaierSum,
    z4: NeumaierSum,
    count: usize,
    inside: usize,
}

fn trial_moments(
    spec: &ExperimentSpec,
    trial: usize,
    window: &Range<usize>,
    interval: Option<&ConfidenceInterval>,
) -> Result<TrialMoments> {
    let trace = run_trial(spec, trial)?;
    let inv_sigma = 1.0 / spec.plant.noise.variance.sqrt();
    let mut acc = TrialMoments::default();
    for (&e, &e2) in trace.errors[window.clone()]
        .iter()
        .zip(&trace.squared_errors[window.clone()])
    {
        let z = e * inv_sigma;
        let z2 = z * z;
        acc.z2 += z2;
        acc.z4 += z2 * z2;
        if interval.is_some_and(|ci| ci.contains(e2)) {
            acc.inside += 1;
        }
    }
    acc.count = window.len();
    Ok(acc)
}

/// Runs every trial and pools steady-state moments of `e` over time and
/// trials.
pub fn run_trials(spec: &ExperimentSpec) -> Result<EnsembleStats> {
    run_trials_with_coverage(spec, None)
}

/// As [`run_trials`], additionally reporting the pooled fraction of
/// steady-state `e^2` samples inside `interval`.
pub fn run_trials_with_coverage(
    spec: &ExperimentSpec,
    interval: Option<&ConfidenceInterval>,
) -> Result<EnsembleStats> {
    spec.validate()?;
    let window = spec.window()?;

    let partials: Vec<Result<TrialMoments>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| trial_moments(spec, t, &window, interval))
        .collect();

    let mut z2 = NeumaierSum::new();
    let mut z4 = NeumaierSum::new();
    let mut count = 0usize;
    let mut inside = 0usize;
    for partial in partials {
        let p = partial?;
        z2.merge(&p.z2);
        z4.merge(&p.z4);
        count += p.count;
        inside += p.inside;
    }

    let n = count as f64;
    let var_r = spec.plant.noise.variance;
    let mean_z2 = z2.value() / n;
    let mean_z4 = z4.value() / n;
    let mut var_z2 = mean_z4 - mean_z2 * mean_z2;
    if var_z2 < 0.0 {
        log::warn!("negative squared-error variance estimate {var_z2:e} clamped to 0");
        var_z2 = 0.0;
    }

    Ok(EnsembleStats {
        mean_e2: mean_z2 * var_r,
        mean_e4: mean_z4 * var_r * var_r,
        var_e2: var_z2 * var_r * var_r,
        sample_count: count,
        coverage: interval.map(|_| inside as f64 / n),
    })
}

/// Fraction of `e^2[n]`, `n` in `window`, inside `interval`.
pub fn coverage(trace: &Trace, window: Range<usize>, interval: &ConfidenceInterval) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if window.end > trace.squared_errors.len() {
        return Err(invalid(
            "window.end",
            window.end as f64,
            "exceeds trace length",
        ));
    }
    let len = window.len();
    let inside = trace.squared_errors[window]
        .iter()
        .filter(|&&v| interval.contains(v))
        .count();
    Ok(inside as f64 / len as f64)
}

/// How a statistic is judged by [`compare`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Check {
    /// Reported only.
    #[default]
    Report,
    /// Relative error must not exceed the tolerance.
    Within(f64),
    /// Direct moment matching is statistically infeasible; the statistic is
    /// verified through bound coverage instead.
    CoverageOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tolerances {
    pub mean_e2: Check,
    pub var_e2: Check,
    pub mean_e4: Check,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub stat: &'static str,
    pub predicted: f64,
    pub empirical: f64,
    pub rel_err: f64,
    pub check: Check,
}

impl ComparisonRow {
    /// `None` when the row is not judged by relative error.
    pub fn passed(&self) -> Option<bool> {
        match self.check {
            Check::Within(tol) => Some(self.rel_err <= tol),
            Check::Report | Check::CoverageOnly => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed() != Some(false))
    }

    pub fn row(&self, stat: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.stat == stat)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            let verdict = match (r.check, r.passed()) {
                (Check::CoverageOnly, _) => "coverage-verified only".to_string(),
                (Check::Within(tol), Some(true)) => format!("PASS (tol {tol})"),
                (Check::Within(tol), _) => format!("FAIL (tol {tol})"),
                (Check::Report, _) => String::new(),
            };
            writeln!(
                f,
                "{:<8} predicted {:<12.6e} empirical {:<12.6e} rel_err {:<9.4} {}",
                r.stat, r.predicted, r.empirical, r.rel_err, verdict
            )?;
        }
        Ok(())
    }
}

fn relative_error(empirical: f64, predicted: f64) -> f64 {
    (empirical - predicted).abs() / predicted.abs()
}

/// Relative errors of the empirical moments against the prediction.
pub fn compare(
    prediction: &Prediction,
    stats: &EnsembleStats,
    tolerances: &Tolerances,
) -> Result<Comparison> {
    for check in [tolerances.mean_e2, tolerances.var_e2, tolerances.mean_e4] {
        if let Check::Within(tol) = check {
            if !(tol >= 0.0) || tol.is_infinite() {
                return Err(invalid("tolerance", tol, "must be finite and >= 0"));
            }
        }
    }
    let row = |stat, predicted: f64, empirical: f64, check| ComparisonRow {
        stat,
        predicted,
        empirical,
        rel_err: relative_error(empirical, predicted),
        check,
    };
    Ok(Comparison {
        rows: vec![
            row("mean_e2", prediction.j_inf, stats.mean_e2, tolerances.mean_e2),
            row("var_e2", prediction.var_e2_inf, stats.var_e2, tolerances.var_e2),
            row("mean_e4", prediction.e4_inf, stats.mean_e4, tolerances.mean_e4),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::default_lms_step;
    use crate::model::predict;
    use crate::signals::{NoiseKind, NoiseSpec};

    fn small_spec(trials: usize, seed: u64) -> ExperimentSpec {
        let n = 4;
        ExperimentSpec {
            signal: SignalSpec::new(0.5, 1.0).unwrap(),
            plant: PlantSpec {
                impulse_response: vec![0.5, -0.3, 0.2, -0.1],
                noise: NoiseSpec::new(NoiseKind::Gaussian, 1e-6).unwrap(),
            },
            filter: FilterSpec::lms(n, default_lms_step(n, 1.0).unwrap()).unwrap(),
            iterations: 4000,
            burn_in_fraction: 0.5,
            trials,
            master_seed: seed,
        }
    }

    #[test]
    fn window_definition() {
        assert_eq!(steady_window(100, 0.5).unwrap(), 50..100);
        assert_eq!(steady_window(10, 0.9).unwrap(), 9..10);
        assert!(matches!(steady_window(10, 0.95), Err(Error::EmptyWindow)));
        assert!(steady_window(10, 0.0).is_err());
        assert!(steady_window(10, 1.0).is_err());
        // 40 000 iterations at the default burn-in leave 20 000 samples.
        assert!(steady_window(40_000, DEFAULT_BURN_IN).unwrap().len() >= 10_000);
    }

    #[test]
    fn single_trial_matches_trace_average() {
        let spec = small_spec(1, 77);
        let stats = run_trials(&spec).unwrap();
        let trace = run_trial(&spec, 0).unwrap();
        let window = spec.window().unwrap();
        let direct: NeumaierSum = trace.squared_errors[window.clone()].iter().sum();
        let direct = direct.value() / window.len() as f64;
        assert!(((stats.mean_e2 - direct) / direct).abs() < 1e-12);
        assert_eq!(stats.sample_count, window.len());
    }

    #[test]
    fn identical_seeds_give_identical_stats() {
        let a = run_trials(&small_spec(6, 5)).unwrap();
        let b = run_trials(&small_spec(6, 5)).unwrap();
        assert_eq!(a, b);
        let c = run_trials(&small_spec(6, 6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stats_do_not_depend_on_thread_count() {
        let spec = small_spec(8, 99);
        let interval = ConfidenceInterval {
            confidence: 0.9,
            lower: 0.0,
            upper: 2e-6,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_trials_with_coverage(&spec, Some(&interval)).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn moment_identity_and_sample_count() {
        let spec = small_spec(3, 1);
        let s = run_trials(&spec).unwrap();
        let identity = s.mean_e4 - s.mean_e2 * s.mean_e2;
        assert!((s.var_e2 - identity).abs() <= 1e-12 * s.mean_e4);
        assert_eq!(s.sample_count, 3 * 2000);
    }

    #[test]
    fn divergence_names_the_trial() {
        let mut spec = small_spec(2, 3);
        spec.filter = FilterSpec::lms(4, 5.0).unwrap();
        spec.iterations = 5000;
        match run_trials(&spec) {
            Err(Error::Diverged { trial, .. }) => assert_eq!(trial, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn coverage_edge_cases() {
        let trace = run_trial(&small_spec(1, 2), 0).unwrap();
        let everything = ConfidenceInterval {
            confidence: 1.0,
            lower: 0.0,
            upper: f64::INFINITY,
        };
        let nothing = ConfidenceInterval {
            confidence: 0.0,
            lower: 0.0,
            upper: 0.0,
        };
        assert_eq!(coverage(&trace, 2000..4000, &everything).unwrap(), 1.0);
        assert_eq!(coverage(&trace, 2000..4000, &nothing).unwrap(), 0.0);
        assert!(coverage(&trace, 10..10, &everything).is_err());
        assert!(coverage(&trace, 10..5000, &everything).is_err());

        let narrow = ConfidenceInterval { upper: 1e-6, ..everything };
        let wide = ConfidenceInterval { upper: 3e-6, ..everything };
        let c_narrow = coverage(&trace, 2000..4000, &narrow).unwrap();
        let c_wide = coverage(&trace, 2000..4000, &wide).unwrap();
        assert!(c_narrow <= c_wide && (0.0..=1.0).contains(&c_narrow));
    }

    #[test]
    fn compare_arithmetic() {
        let spec = small_spec(1, 0);
        let prediction = predict(&spec.filter, &spec.plant, &spec.signal, None).unwrap();
        let exact = EnsembleStats {
            mean_e2: prediction.j_inf,
            mean_e4: prediction.e4_inf,
            var_e2: prediction.var_e2_inf,
            sample_count: 1,
            coverage: None,
        };
        let report = compare(&prediction, &exact, &Tolerances::default()).unwrap();
        assert!(report.rows.iter().all(|r| r.rel_err == 0.0));

        let mut p = prediction.clone();
        p.var_e2_inf = 2.0;
        let s = EnsembleStats { var_e2: 2.3, ..exact };
        let tol = Tolerances {
            var_e2: Check::Within(0.1),
            ..Default::default()
        };
        let report = compare(&p, &s, &tol).unwrap();
        let row = report.row("var_e2").unwrap();
        assert!((row.rel_err - 0.15).abs() < 1e-12);
        assert_eq!(row.passed(), Some(false));
        assert!(!report.passed());

        let tol = Tolerances {
            var_e2: Check::CoverageOnly,
            ..Default::default()
        };
        assert!(compare(&p, &s, &tol).unwrap().passed());
        let bad = Tolerances {
            mean_e2: Check::Within(-1.0),
            ..Default::default()
        };
        assert!(compare(&p, &s, &bad).is_err());
    }

    #[test]
    fn compensated_reduction_is_order_insensitive() {
        let trace = run_trial(&small_spec(1, 4), 0).unwrap();
        let forward: NeumaierSum = trace.squared_errors.iter().sum();
        let backward: NeumaierSum = trace.squared_errors.iter().rev().sum();
        assert!(((forward.value() - backward.value()) / forward.value()).abs() <= 1e-12);
    }

    #[test]
    fn stats_scale_with_noise_power() {
        let spec = small_spec(4, 12);
        let mut louder = spec.clone();
        louder.plant.noise.variance *= 100.0;
        let a = run_trials(&spec).unwrap();
        let b = run_trials(&louder).unwrap();
        assert!((b.mean_e2 / (100.0 * a.mean_e2) - 1.0).abs() < 0.02);
        assert!((b.var_e2 / (1e4 * a.var_e2) - 1.0).abs() < 0.05);
    }
}
