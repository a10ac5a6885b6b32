//! Confidence bounds on steady-state squared-error samples.
//!
//! For Gaussian noise the converged error is Gaussian, so `e^2 / J(inf)` is
//! chi-square with one degree of freedom and equal-tail intervals follow from
//! its quantiles. For other noises the bound is `J(inf) + 3 sigma_{e^2}`.

use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};

use libm::{erf, erfc};

use crate::error::{ensure_positive, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub confidence: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ConfidenceInterval {
    #[inline]
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            confidence: self.confidence,
            lower: self.lower * factor,
            upper: self.upper * factor,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn validate_probability(name: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(invalid(name, p, "must lie in (0, 1)"))
    }
}

/// Rational approximation of the standard normal quantile (Acklam), relative
/// error about 1e-9. Used only as a starting point.
fn normal_quantile_approx(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |t: f64| {
        let s = (-2.0 * t.ln()).sqrt();
        (((((C[0] * s + C[1]) * s + C[2]) * s + C[3]) * s + C[4]) * s + C[5])
            / ((((D[0] * s + D[1]) * s + D[2]) * s + D[3]) * s + 1.0)
    };

    if q < P_LOW {
        tail(q)
    } else if q <= 1.0 - P_LOW {
        let s = q - 0.5;
        let r = s * s;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * s
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - q)
    }
}

/// Solves `erf(y) = p` for `p` in (0, 1), refining the rational initializer
/// with Newton steps. Above the median the residual is taken through
/// `erfc` to keep the upper tail accurate.
fn erf_inv(p: f64) -> f64 {
    let mut y = normal_quantile_approx(0.5 * (1.0 + p)) / SQRT_2;
    let tail = 1.0 - p;
    for _ in 0..6 {
        let residual = if p < 0.5 {
            erf(y) - p
        } else {
            tail - erfc(y)
        };
        let slope = FRAC_2_SQRT_PI * (-y * y).exp();
        let step = residual / slope;
        y -= step;
        if step.abs() <= 1e-17 * y.abs() {
            break;
        }
    }
    y
}

/// Standard normal quantile.
pub fn normal_quantile(q: f64) -> Result<f64> {
    validate_probability("q", q)?;
    let p = 2.0 * q - 1.0;
    if p == 0.0 {
        return Ok(0.0);
    }
    Ok(SQRT_2 * erf_inv(p.abs()).copysign(p))
}

/// Chi-square (1 dof) CDF: `erf(sqrt(x / 2))`.
pub fn chi2_1_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        erf((0.5 * x).sqrt())
    }
}

/// Chi-square (1 dof) quantile: `2 erfinv(p)^2`.
pub fn chi2_1_quantile(p: f64) -> Result<f64> {
    validate_probability("p", p)?;
    let y = erf_inv(p);
    Ok(2.0 * y * y)
}

/// Interval with probability `(1 - c) / 2` in each tail.
pub fn equal_tail_interval(confidence: f64) -> Result<ConfidenceInterval> {
    validate_probability("confidence", confidence)?;
    Ok(ConfidenceInterval {
        confidence,
        lower: chi2_1_quantile(0.5 * (1.0 - confidence))?,
        upper: chi2_1_quantile(0.5 * (1.0 + confidence))?,
    })
}

/// Equal-tail interval for the squared error of a Gaussian steady state with
/// mean-square error `j_inf`.
pub fn gaussian_se_bounds(j_inf: f64, confidence: f64) -> Result<ConfidenceInterval> {
    ensure_positive("j_inf", j_inf)?;
    Ok(equal_tail_interval(confidence)?.scaled(j_inf))
}

/// `j_inf + 3 sqrt(var_e2)`.
pub fn three_sigma_upper(j_inf: f64, var_e2: f64) -> Result<f64> {
    ensure_positive("j_inf", j_inf)?;
    if !(var_e2 >= 0.0 && var_e2.is_finite()) {
        return Err(invalid("var_e2", var_e2, "must be nonnegative and finite"));
    }
    Ok(j_inf + 3.0 * var_e2.sqrt())
}

pub fn to_db(power: f64) -> f64 {
    10.0 * power.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TABLE_95: (f64, f64) = (0.0009820691171752583, 5.023886187314888);
    const TABLE_997: (f64, f64) = (3.5342958990342576e-06, 10.078615499494532);

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Bisection on the chi-square CDF; independent of the Newton path.
    fn bisect_quantile(p: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 100.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if erf((mid / 2.0).sqrt()) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn table_quantiles() {
        assert!(rel(chi2_1_quantile(0.975).unwrap(), TABLE_95.1) <= 1e-9);
        assert!(rel(chi2_1_quantile(0.025).unwrap(), TABLE_95.0) <= 1e-9);
        assert!(rel(chi2_1_quantile(0.0015).unwrap(), TABLE_997.0) <= 1e-9);
        assert!(rel(chi2_1_quantile(0.9985).unwrap(), TABLE_997.1) <= 1e-9);
    }

    #[test]
    fn median_matches_bisection() {
        let oracle = bisect_quantile(0.5);
        assert!((oracle - 0.454936).abs() < 1e-6);
        assert!(rel(chi2_1_quantile(0.5).unwrap(), oracle) <= 1e-12);
    }

    #[test]
    fn rejects_probabilities_outside_open_unit_interval() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(chi2_1_quantile(p).is_err());
            assert!(equal_tail_interval(p).is_err());
        }
    }

    #[test]
    fn table_intervals() {
        let ci = equal_tail_interval(0.95).unwrap();
        assert!(rel(ci.lower, TABLE_95.0) <= 1e-9 && rel(ci.upper, TABLE_95.1) <= 1e-9);
        let ci = equal_tail_interval(0.997).unwrap();
        assert!(rel(ci.lower, TABLE_997.0) <= 1e-9 && rel(ci.upper, TABLE_997.1) <= 1e-9);
    }

    #[test]
    fn degenerate_interval_collapses_to_median() {
        let median = bisect_quantile(0.5);
        let ci = equal_tail_interval(1e-9).unwrap();
        assert!(rel(ci.lower, median) < 1e-8 && rel(ci.upper, median) < 1e-8);
        assert!(ci.lower < ci.upper);
    }

    #[test]
    fn gaussian_bounds_scale_table() {
        let ci = gaussian_se_bounds(1.0, 0.997).unwrap();
        assert!(rel(ci.upper, TABLE_997.1) <= 1e-9);
        let ci = gaussian_se_bounds(1e-6, 0.997).unwrap();
        assert!(rel(ci.upper, 1.0078615499494532e-5) <= 1e-9);
        // 10 log10 of the upper quantile.
        assert!((to_db(TABLE_997.1) - 10.03).abs() < 0.005);
        assert!(gaussian_se_bounds(0.0, 0.95).is_err());
    }

    #[test]
    fn three_sigma_arithmetic() {
        assert_eq!(three_sigma_upper(2.0, 9.0).unwrap(), 11.0);
        assert_eq!(three_sigma_upper(2.0, 0.0).unwrap(), 2.0);
        assert!(three_sigma_upper(2.0, -1.0).is_err());
    }

    #[test]
    fn normal_quantile_symmetry() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        let z = normal_quantile(0.975).unwrap();
        assert!((z - 1.959963984540054).abs() < 1e-13);
        assert_eq!(normal_quantile(0.025).unwrap(), -z);
    }

    proptest! {
        #[test]
        fn quantile_round_trips_through_cdf(p in 1e-6f64..0.999999) {
            let x = chi2_1_quantile(p).unwrap();
            prop_assert!((chi2_1_cdf(x) - p).abs() <= 1e-9);
        }

        #[test]
        fn quantile_is_increasing(p in 1e-6f64..0.99, dp in 1e-6f64..0.009) {
            prop_assert!(chi2_1_quantile(p + dp).unwrap() > chi2_1_quantile(p).unwrap());
        }

        #[test]
        fn interval_widens_with_confidence(c in 0.01f64..0.98, dc in 1e-4f64..0.01) {
            let narrow = equal_tail_interval(c).unwrap();
            let wide = equal_tail_interval(c + dc).unwrap();
            prop_assert!(wide.width() > narrow.width());
        }

        #[test]
        fn bounds_scale_linearly(j in 1e-9f64..1e3, c in 0.5f64..0.999) {
            let k = 4.0; // power of two: scaling is exact in floating point
            let a = gaussian_se_bounds(k * j, c).unwrap();
            let b = gaussian_se_bounds(j, c).unwrap().scaled(k);
            prop_assert_eq!(a, b);
        }
    }
}
