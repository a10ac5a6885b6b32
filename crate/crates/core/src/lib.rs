//! Steady-state squared-error statistics of LMS and NLMS adaptive filters.
//!
//! The crate predicts the mean, fourth moment and variance of the squared
//! error `e^2[n]` of a converged LMS/NLMS filter in closed form ([`model`]),
//! turns them into confidence bounds for a single realization ([`bounds`]),
//! and checks both against Monte Carlo ensembles of simulated filters
//! ([`ensemble`]).

pub mod bounds;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod filters;
pub mod io;
pub mod model;
pub mod signals;
pub mod summation;

pub use bounds::{
    chi2_1_cdf, chi2_1_quantile, equal_tail_interval, gaussian_se_bounds, three_sigma_upper,
    ConfidenceInterval,
};
pub use config::{ExperimentConfig, ImpulseSource, StepSetting};
pub use ensemble::{
    compare, coverage, run_trial, run_trials, run_trials_with_coverage, steady_window, Check,
    Comparison, EnsembleStats, ExperimentSpec, Tolerances,
};
pub use error::{Error, Result};
pub use filters::{
    default_lms_step, effective_step, simulate, Algorithm, FilterSpec, PlantSpec, Trace,
};
pub use model::{
    fourth_moment, predict, steady_state_mse, var_e2_gaussian, var_e2_general, var_e2_lms,
    weight_error_cov_lms, CovMatrix, Prediction,
};
pub use signals::{
    ar1_autocorrelation_matrix, gen_ar1, gen_noise, sample_kurtosis, theoretical_kurtosis,
    AutocorrMatrix, NoiseKind, NoiseSpec, RandomStream, SignalSpec,
};
