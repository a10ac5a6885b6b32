use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use securve::bounds::to_db;
use securve::io::{comparison_csv, trace_csv};
use securve::{
    chi2_1_quantile, compare, predict, run_trial, run_trials_with_coverage, Check,
    ExperimentConfig, NoiseKind, Prediction, Tolerances,
};

#[derive(Parser)]
#[command(name = "securve", version, about = "Steady-state squared-error statistics of LMS/NLMS filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form steady-state prediction and bounds.
    Predict {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one realization and write its error curve as `n,e,e2`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo ensemble and compare it with the prediction.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Maximum relative error allowed for mean(e^2).
        #[arg(long)]
        tol_mean_e2: Option<f64>,
        /// Maximum relative error allowed for var(e^2).
        #[arg(long)]
        tol_var_e2: Option<f64>,
        /// Maximum relative error allowed for mean(e^4).
        #[arg(long)]
        tol_mean_e4: Option<f64>,
        #[command(flatten)]
        parallel: Parallel,
    },
    /// Pooled fraction of steady-state e^2 samples inside the predicted bound.
    Coverage {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        confidence: f64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        parallel: Parallel,
    },
    /// Chi-square (1 dof) quantile.
    Quantile {
        #[arg(long, allow_negative_numbers = true)]
        p: f64,
    },
}

#[derive(Args)]
struct Parallel {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl Parallel {
    fn install<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .context("building thread pool")?;
                Ok(pool.install(job))
            }
            None => Ok(job()),
        }
    }
}

/// Writes `contents` to `path`, removing any partial file on failure.
fn write_output(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|err| {
        let _ = fs::remove_file(path);
        anyhow::Error::new(err).context(format!("writing {}", path.display()))
    })
}

/// Formats with 15 significant digits.
fn significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return value.to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = digits as i32 - 1 - magnitude;
    if (0..=24).contains(&decimals) {
        format!("{value:.*}", decimals as usize)
    } else {
        format!("{value:.*e}", digits - 1)
    }
}

fn power_line(label: &str, value: f64, db: bool) -> String {
    if db {
        format!("{label:<22} {value:.6e}  ({:+.2} dB)", to_db(value))
    } else {
        format!("{label:<22} {value:.6e}")
    }
}

fn print_prediction(config: &ExperimentConfig, p: &Prediction) {
    let db = config.db;
    println!("{:<22} {}", "noise_kind", p.noise_kind);
    println!("{:<22} {:.6e}", "effective_mu", p.effective_mu);
    println!("{:<22} {:.6}", "kurtosis", p.kurtosis);
    println!("{}", power_line("j_min", p.j_min, db));
    println!("{}", power_line("j_inf", p.j_inf, db));
    println!("{:<22} {:.6e}", "e4_inf", p.e4_inf);
    println!("{:<22} {:.6e}", "var_e2_inf", p.var_e2_inf);
    println!("{}", power_line("sigma_e2_inf", p.sigma_e2(), db));
    match p.gaussian_interval {
        Some(ci) => {
            let label = format!("interval {}%", ci.confidence * 100.0);
            println!("{}", power_line(&format!("{label} lower"), ci.lower, db));
            println!("{}", power_line(&format!("{label} upper"), ci.upper, db));
            println!(
                "{:<22} {:.2} dB",
                "upper above j_inf",
                to_db(ci.upper / p.j_inf)
            );
        }
        None => {
            println!("{}", power_line("three_sigma_upper", p.three_sigma_upper, db));
            println!(
                "{:<22} {:.2} dB",
                "upper above j_inf",
                to_db(p.three_sigma_upper / p.j_inf)
            );
        }
    }
    if p.small_step_stressed {
        println!("warning: step size outside the small-step regime; predictions degrade");
    }
}

fn prediction_for(config: &ExperimentConfig, confidence: f64) -> Result<Prediction> {
    let signal = config.signal()?;
    let filter = config.filter(&signal)?;
    let plant = config.plant()?;
    Ok(predict(&filter, &plant, &signal, Some(confidence))?)
}

fn check(tol: Option<f64>) -> Check {
    tol.map_or(Check::Report, Check::Within)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Quantile { p } => {
            println!("{}", significant(chi2_1_quantile(p)?, 15));
        }
        Command::Predict { config } => {
            let config = ExperimentConfig::load(&config)?;
            let prediction = prediction_for(&config, config.confidence)?;
            print_prediction(&config, &prediction);
        }
        Command::Simulate { config, seed, out } => {
            let config = ExperimentConfig::load(&config)?;
            let spec = config.experiment(1, seed)?;
            let trace = run_trial(&spec, 0)?;
            write_output(&out, &trace_csv(&trace))?;
        }
        Command::Ensemble {
            config,
            trials,
            seed,
            out,
            tol_mean_e2,
            tol_var_e2,
            tol_mean_e4,
            parallel,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let spec = config.experiment(trials, seed)?;
            let prediction = prediction_for(&config, config.confidence)?;
            let bound = prediction.sample_bound();
            let stats = parallel.install(|| run_trials_with_coverage(&spec, Some(&bound)))??;

            let heavy = config.noise_kind == NoiseKind::GaussianPower;
            let higher = |tol| if heavy { Check::CoverageOnly } else { check(tol) };
            let tolerances = Tolerances {
                mean_e2: check(tol_mean_e2),
                var_e2: higher(tol_var_e2),
                mean_e4: higher(tol_mean_e4),
            };
            let comparison = compare(&prediction, &stats, &tolerances)?;
            write_output(&out, &comparison_csv(&comparison))?;

            println!("{:<22} {}", "samples", stats.sample_count);
            if let Some(c) = stats.coverage {
                println!("{:<22} {c:.6}", "bound coverage");
            }
            print!("{comparison}");
            return Ok(comparison.passed());
        }
        Command::Coverage {
            config,
            trials,
            confidence,
            seed,
            parallel,
        } => {
            let config = ExperimentConfig::load(&config)?;
            if !(confidence > 0.0 && confidence < 1.0) {
                bail!("confidence must lie in (0, 1), got {confidence}");
            }
            let spec = config.experiment(trials, seed)?;
            let prediction = prediction_for(&config, confidence)?;
            let bound = prediction.sample_bound();
            let stats = parallel.install(|| run_trials_with_coverage(&spec, Some(&bound)))??;
            let kind = if prediction.gaussian_interval.is_some() {
                format!("chi-square {}% interval", confidence * 100.0)
            } else {
                "j_inf + 3 sigma upper bound".to_string()
            };
            println!("{:<22} {kind} [{:e}, {:e}]", "bound", bound.lower, bound.upper);
            println!("{:<22} {}", "samples", stats.sample_count);
            println!("{:<22} {:.6}", "coverage", stats.coverage.unwrap_or(f64::NAN));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
