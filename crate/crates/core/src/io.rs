//! Impulse-response files, the synthetic echo path, and CSV rendering.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::ensemble::Comparison;
use crate::error::{ensure_positive, invalid, Error, Result};
use crate::filters::Trace;

/// Reads one coefficient per line. Blank lines and everything after `#` are
/// ignored.
pub fn load_impulse_response(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_impulse_response(&text, path)
}

pub fn parse_impulse_response(text: &str, path: &Path) -> Result<Vec<f64>> {
    let mut coefficients = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let value: f64 = line
            .parse()
            .map_err(|_| parse_err(format!("`{line}` is not a number")))?;
        if !value.is_finite() {
            return Err(parse_err(format!("non-finite coefficient `{line}`")));
        }
        coefficients.push(value);
    }
    if coefficients.is_empty() {
        return Err(Error::Config {
            path: path.to_path_buf(),
            message: "impulse response has no coefficients".into(),
        });
    }
    Ok(coefficients)
}

/// Alternating-sign exponentially decaying echo path with unit energy:
/// `h[k] ∝ (-1)^k exp(-k / decay)`.
pub fn synthetic_echo_path(n_taps: usize, decay: f64) -> Result<Vec<f64>> {
    if n_taps == 0 {
        return Err(invalid("n_taps", 0.0, "must be at least 1"));
    }
    ensure_positive("decay", decay)?;
    let mut h: Vec<f64> = (0..n_taps)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * (-(k as f64) / decay).exp()
        })
        .collect();
    let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    h.iter_mut().for_each(|v| *v /= norm);
    Ok(h)
}

/// Shortest representation that round-trips, in exponent notation.
pub fn format_f64(value: f64) -> String {
    format!("{value:e}")
}

/// `n,e,e2` rows for one realization.
pub fn trace_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(48 * trace.iterations + 8);
    out.push_str("n,e,e2\n");
    for (n, (e, e2)) in trace.errors.iter().zip(&trace.squared_errors).enumerate() {
        let _ = writeln!(out, "{n},{e:e},{e2:e}");
    }
    out
}

/// `stat,predicted,empirical,rel_err` rows.
pub fn comparison_csv(comparison: &Comparison) -> String {
    let mut out = String::from("stat,predicted,empirical,rel_err\n");
    for r in &comparison.rows {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e}",
            r.stat, r.predicted, r.empirical, r.rel_err
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_plain_list() {
        let f = write_temp("1.0\n0.5\n");
        assert_eq!(load_impulse_response(f.path()).unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn skips_comments() {
        let f = write_temp("# echo path\n1.0\n\n# tail\n-0.25  # inline\n");
        assert_eq!(load_impulse_response(f.path()).unwrap(), vec![1.0, -0.25]);
    }

    #[test]
    fn reports_bad_lines_and_empty_files() {
        let f = write_temp("1.0\nabc\n");
        match load_impulse_response(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let f = write_temp("1.0\ninf\n");
        assert!(matches!(load_impulse_response(f.path()), Err(Error::Parse { line: 2, .. })));
        let f = write_temp("# nothing\n");
        let err = load_impulse_response(f.path()).unwrap_err();
        assert!(err.to_string().contains(&f.path().display().to_string()));
        assert!(matches!(
            load_impulse_response("/nonexistent/h.txt"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn synthetic_path_values() {
        assert_eq!(synthetic_echo_path(1, 3.0).unwrap(), vec![1.0]);
        let h = synthetic_echo_path(2, 1.0).unwrap();
        let e1 = (-1.0f64).exp();
        let norm = (1.0 + e1 * e1).sqrt();
        assert!((h[0] - 1.0 / norm).abs() < 1e-15);
        assert!((h[1] + e1 / norm).abs() < 1e-15);
        assert!(synthetic_echo_path(0, 1.0).is_err());
        assert!(synthetic_echo_path(4, 0.0).is_err());
    }

    #[test]
    fn synthetic_path_has_unit_norm() {
        for n in [1, 2, 7, 64, 128, 1000] {
            for decay in [0.5, 4.0, 16.0, 1e3] {
                let h = synthetic_echo_path(n, decay).unwrap();
                let energy: f64 = h.iter().map(|v| v * v).sum();
                assert!((energy.sqrt() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_headers_and_round_trip() {
        let trace = Trace {
            errors: vec![0.5, -1e-7],
            squared_errors: vec![0.25, 1e-14],
            iterations: 2,
            final_weights: vec![],
        };
        let csv = trace_csv(&trace);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("n,e,e2"));
        let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        assert_eq!(row[1].parse::<f64>().unwrap(), -1e-7);
        assert_eq!(row[2].parse::<f64>().unwrap(), 1e-14);
        assert_eq!(format_f64(0.1 + 0.2).parse::<f64>().unwrap(), 0.1 + 0.2);
    }
}
