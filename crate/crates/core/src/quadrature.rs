//! Shared quadrature tables and the standard normal helpers.

use std::f64::consts::{PI, SQRT_2};
use std::sync::LazyLock;

use gauss_quad::{GaussHermite, GaussLegendre};
use libm::erfc;

use crate::error::{Error, Result};

pub const HERMITE_NODES: usize = 200;
pub const LEGENDRE_NODES: usize = 200;

/// Physicists' Gauss-Hermite rule, weight `exp(-y^2)`.
static HERMITE: LazyLock<Vec<(f64, f64)>> = LazyLock::new(|| {
    let rule = GaussHermite::new(HERMITE_NODES.try_into().unwrap());
    rule.iter().map(|(x, w)| (*x, *w)).collect()
});

/// Gauss-Legendre rule on `[-1, 1]`.
static LEGENDRE: LazyLock<Vec<(f64, f64)>> = LazyLock::new(|| {
    let rule = GaussLegendre::new(LEGENDRE_NODES.try_into().unwrap());
    rule.iter().map(|(x, w)| (*x, *w)).collect()
});

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `int_lo^hi f(x) dx` with the 200-point Gauss-Legendre rule.
pub fn legendre(lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    LEGENDRE
        .iter()
        .map(|&(y, w)| w * f(mid + half * y))
        .sum::<f64>()
        * half
}

/// `int_{x > 0} f(x) N(x; mean, var) dx` (or `x < 0` when `positive` is false).
///
/// The range is cut at 10 standard deviations from the mean.
pub fn normal_half_line(
    mean: f64,
    var: f64,
    positive: bool,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    let sd = var.sqrt();
    let (lo, hi) = if positive {
        ((mean - 10.0 * sd).max(0.0), (mean + 10.0 * sd).max(0.0))
    } else {
        ((mean - 10.0 * sd).min(0.0), (mean + 10.0 * sd).min(0.0))
    };
    legendre(lo, hi, |x| {
        let z = (x - mean) / sd;
        f(x) * normal_pdf(z) / sd
    })
}

/// `E[f(Z)]` for `Z ~ N(mean, var)` with the fixed 200-node Gauss-Hermite rule.
pub fn normal_expectation(mean: f64, var: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let scale = (2.0 * var).sqrt();
    HERMITE
        .iter()
        .map(|&(y, w)| w * f(mean + scale * y))
        .sum::<f64>()
        / PI.sqrt()
}

/// Adaptive Gauss-Hermite integral of `g(x) * exp(log_weight(x))` over the
/// real line.
///
/// The nodes are centred at the mode of `log_weight` and scaled by its
/// curvature, both located numerically, so a narrow weight is resolved no
/// matter where it sits. Returns the integral divided by
/// `exp(log_weight(mode))` together with that log-scale.
pub fn adaptive_hermite(
    log_weight: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
) -> Result<(f64, f64)> {
    let (mode, curvature) = locate_mode(&log_weight)?;
    let scale = 1.0 / curvature.sqrt();
    let peak = log_weight(mode);
    let total = HERMITE
        .iter()
        .map(|&(y, w)| {
            let x = mode + SQRT_2 * scale * y;
            w * g(x) * (log_weight(x) - peak + y * y).exp()
        })
        .sum::<f64>()
        * SQRT_2
        * scale;
    Ok((total, peak))
}

/// Newton iteration with finite-difference derivatives for the maximum of a
/// smooth concave log-weight. Returns the mode and `-h''(mode)`.
fn locate_mode(h: &impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let mut x = 0.0_f64;
    let mut step = 1e-2;
    for _ in 0..200 {
        let (f0, fp, fm) = (h(x), h(x + step), h(x - step));
        let d1 = (fp - fm) / (2.0 * step);
        let d2 = (fp - 2.0 * f0 + fm) / (step * step);
        if !(d2 < 0.0) || !d1.is_finite() {
            return Err(Error::Numeric(format!(
                "log-weight is not concave near x = {x} (h'' = {d2})"
            )));
        }
        let dx = -d1 / d2;
        x += dx;
        let sd = 1.0 / (-d2).sqrt();
        step = (0.05 * sd).max(1e-9);
        if dx.abs() <= 1e-13 * (1.0 + x.abs()) {
            break;
        }
    }
    let d2 = (h(x + step) - 2.0 * h(x) + h(x - step)) / (step * step);
    if !(d2 < 0.0) {
        return Err(Error::Numeric("log-weight lost concavity at the mode".into()));
    }
    Ok((x, -d2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((normal_cdf(-8.0) - 6.220_960_574_271_785e-16).abs() < 1e-28);
    }

    #[test]
    fn legendre_polynomial_exact() {
        let v = legendre(0.0, 2.0, |x| x * x * x);
        assert!((v - 4.0).abs() < 1e-13);
    }

    #[test]
    fn half_line_normal_mass() {
        let m = normal_half_line(0.3, 0.5, true, |_| 1.0);
        assert!((m - normal_cdf(0.3 / 0.5f64.sqrt())).abs() < 1e-12);
        let n = normal_half_line(0.3, 0.5, false, |_| 1.0);
        assert!((m + n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_expectation_moments() {
        let m2 = normal_expectation(0.5, 2.0, |z| z * z);
        assert!((m2 - 2.25).abs() < 1e-12);
    }

    #[test]
    fn adaptive_hermite_narrow_gaussian() {
        // exp(-(x - 3)^2 / (2 * 0.01)) integrates to sqrt(2 pi 0.01).
        let (v, peak) = adaptive_hermite(|x| -(x - 3.0) * (x - 3.0) / 0.02, |x| x).unwrap();
        let expected = 3.0 * (2.0 * PI * 0.01).sqrt();
        assert!(peak.abs() < 1e-12);
        assert!((v - expected).abs() < 1e-12 * expected);
    }
}
