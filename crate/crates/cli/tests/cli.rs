use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_securve");

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn securve(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = "\
algorithm = lms
n_taps = 8
mu = auto
ar1_a = 0.5
input_variance = 1
noise_kind = gaussian
noise_variance = 1e-6
impulse_response = synthetic:3
iterations = 8000
";

#[test]
fn quantile_prints_fifteen_significant_digits() {
    let out = securve(&["quantile", "--p", "0.975"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "5.02388618731489");
    let value: f64 = stdout(&out).trim().parse().unwrap();
    assert!(((value - 5.023886187314888) / 5.023886187314888).abs() < 1e-14);
}

#[test]
fn quantile_rejects_out_of_range_probability() {
    let out = securve(&["quantile", "--p", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
}

#[test]
fn predict_reports_gaussian_upper_bound() {
    let out = securve(&["predict", "--config", configs_dir().join("lms_gaussian.cfg").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let field = |name: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        line[name.len()..].split_whitespace().next().unwrap().parse().unwrap()
    };
    let j_inf = field("j_inf");
    let upper = field("interval 99.7% upper");
    assert!((j_inf / (1e-6 * 31.0 / 30.0) - 1.0).abs() < 1e-6);
    // Printed with 7 significant digits.
    assert!((upper / (j_inf * 10.078615499494532) - 1.0).abs() < 1e-6);
    assert!(text.contains("10.03 dB"));
}

#[test]
fn predict_reports_three_sigma_bound_for_non_gaussian_noise() {
    let out = securve(&["predict", "--config", configs_dir().join("nlms_laplacian.cfg").to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("three_sigma_upper"));
}

#[test]
fn shipped_configs_all_load() {
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let out = securve(&["predict", "--config", path.to_str().unwrap()]);
            assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        }
    }
}

#[test]
fn simulate_is_byte_identical_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let status = securve(&[
            "simulate", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap(),
        ]);
        assert!(status.status.success());
        fs::read(out).unwrap()
    };
    let a = run("a.csv", "7");
    let b = run("b.csv", "7");
    let c = run("c.csv", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,e,e2"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8000);
    for row in rows.iter().take(50) {
        let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[1] * fields[1], fields[2]);
    }
}

#[test]
fn ensemble_writes_comparison_and_honours_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("stats.csv");
    let base = [
        "ensemble", "--config", cfg.to_str().unwrap(), "--trials", "8", "--seed", "1", "--out",
        out.to_str().unwrap(),
    ];

    let loose = securve(&[&base[..], &["--tol-mean-e2", "0.2", "--tol-var-e2", "0.5"]].concat());
    assert!(loose.status.success(), "{}", stdout(&loose));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("stat,predicted,empirical,rel_err"));
    let stats: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(stats, ["mean_e2", "var_e2", "mean_e4"]);

    let strict = securve(&[&base[..], &["--tol-mean-e2", "0"]].concat());
    assert_eq!(strict.status.code(), Some(1));
    assert!(stdout(&strict).contains("FAIL"));
}

#[test]
fn heavy_tailed_variance_is_marked_coverage_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("gaussian\n", "gaussian_power\n"));
    let out = dir.path().join("stats.csv");
    let run = securve(&[
        "ensemble", "--config", cfg.to_str().unwrap(), "--trials", "4", "--seed", "1", "--out",
        out.to_str().unwrap(), "--tol-var-e2", "0",
    ]);
    assert!(run.status.success());
    assert!(stdout(&run).contains("coverage-verified only"));
}

#[test]
fn coverage_reports_pooled_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = securve(&[
        "coverage", "--config", cfg.to_str().unwrap(), "--trials", "10", "--confidence", "0.95", "--seed", "3",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let line = text.lines().find(|l| l.starts_with("coverage")).unwrap();
    let value: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((value - 0.95).abs() < 0.01, "{value}");
    assert!(text.contains("samples                40000"));
}

#[test]
fn config_errors_are_one_line_and_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}stepsize = 1\n"));
    let out = securve(&["predict", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1);
    assert!(err.contains("unknown key `stepsize`") && err.contains(":10:"), "{err}");

    let missing = securve(&["predict", "--config", "/nonexistent.cfg"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn failed_runs_leave_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    // Huge step: the filter diverges.
    let cfg = write_config(dir.path(), &SMALL.replace("mu = auto", "mu = 5"));
    let out = dir.path().join("trace.csv");
    let run = securve(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("diverged"));
    assert!(!out.exists());

    let unwritable = dir.path().join("missing-dir").join("trace.csv");
    let cfg = write_config(dir.path(), SMALL);
    let run = securve(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", unwritable.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(!unwritable.exists());
}
