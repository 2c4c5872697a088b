//! Scalar Gaussian densities.

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Density of `N(x; mean, var)`.
pub fn gauss_pdf(x: f64, mean: f64, var: f64) -> Result<f64> {
    Ok(gauss_logpdf(x, mean, var)?.exp())
}

/// Natural log of `N(x; mean, var)`.
pub fn gauss_logpdf(x: f64, mean: f64, var: f64) -> Result<f64> {
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::invalid(format!("gaussian variance must be positive, got {var}")));
    }
    Ok(log_normal(x, mean, var))
}

/// Unchecked log-density; callers guarantee `var > 0`.
#[inline]
pub(crate) fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Logistic sigmoid of a log-odds value, stable for large magnitudes.
#[inline]
pub(crate) fn sigmoid(log_odds: f64) -> f64 {
    if log_odds >= 0.0 {
        1.0 / (1.0 + (-log_odds).exp())
    } else {
        let e = log_odds.exp();
        e / (1.0 + e)
    }
}

/// Product of two Gaussian densities in `r`, returned as (mean, var).
///
/// Either input may carry an infinite variance (a flat message).
pub(crate) fn gaussian_product(m1: f64, v1: f64, m2: f64, v2: f64) -> (f64, f64) {
    let p1 = if v1.is_infinite() { 0.0 } else { 1.0 / v1 };
    let p2 = if v2.is_infinite() { 0.0 } else { 1.0 / v2 };
    let p = p1 + p2;
    if p <= 0.0 {
        return (0.0, f64::INFINITY);
    }
    let h = if p1 > 0.0 { m1 * p1 } else { 0.0 } + if p2 > 0.0 { m2 * p2 } else { 0.0 };
    (h / p, 1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_at_zero() {
        let p = gauss_pdf(0.0, 0.0, 1.0).unwrap();
        assert!((p - 0.398_942_280_4).abs() < 1e-10);
    }

    #[test]
    fn peak_value() {
        for &(m, v) in &[(0.3, 0.5), (-2.0, 4.0), (10.0, 1e-3)] {
            let p = gauss_pdf(m, m, v).unwrap();
            let expected = (2.0 * std::f64::consts::PI * v).powf(-0.5);
            assert!((p - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn normalizes_under_trapezoid_rule() {
        let (mean, var) = (0.2_f64, 2.5_f64);
        let sd = var.sqrt();
        let (lo, hi) = (mean - 12.0 * sd, mean + 12.0 * sd);
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let mut acc = 0.5 * (gauss_pdf(lo, mean, var).unwrap() + gauss_pdf(hi, mean, var).unwrap());
        for i in 1..n {
            acc += gauss_pdf(lo + i as f64 * h, mean, var).unwrap();
        }
        assert!((acc * h - 1.0).abs() < 1e-9);
        assert!(gauss_pdf(1.3, mean, var).unwrap() > 0.0);
    }

    #[test]
    fn rejects_nonpositive_variance() {
        assert!(gauss_pdf(0.0, 0.0, 0.0).is_err());
        assert!(gauss_logpdf(0.0, 0.0, -1.0).is_err());
        assert!(gauss_pdf(0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn log_domain_survives_far_tails() {
        let lp = gauss_logpdf(50.0, 0.0, 1.0).unwrap();
        assert!(lp.is_finite());
        assert!((lp - (-0.5 * (LN_2PI + 2500.0))).abs() < 1e-9);
    }

    #[test]
    fn product_with_flat_message_is_identity() {
        let (m, v) = gaussian_product(1.5, 0.2, 0.0, f64::INFINITY);
        assert_eq!((m, v), (1.5, 0.2));
    }
}
