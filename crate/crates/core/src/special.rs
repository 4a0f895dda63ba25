//! Error-function family used by the kernels.

use std::f64::consts::PI;

pub const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
/// 1/sqrt(pi)
pub const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// erf(x)/x, continuous through x = 0.
pub fn erf_over_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        // 2/sqrt(pi) (1 - x^2/3 + x^4/10)
        let x2 = x * x;
        FRAC_2_SQRT_PI * (1.0 - x2 / 3.0 + x2 * x2 / 10.0)
    } else {
        erf(x) / x
    }
}

const CF_SWITCH: f64 = 5.0;

/// Scaled complementary error function exp(x^2) erfc(x) for x >= 0.
pub fn erfcx(x: f64) -> f64 {
    assert!(x >= 0.0, "erfcx is only implemented for x >= 0");
    if x < CF_SWITCH {
        (x * x).exp() * erfc(x)
    } else {
        FRAC_1_SQRT_PI / laplace_cf(x)
    }
}

/// 1 - sqrt(pi) x erfcx(x), evaluated without cancellation for large x.
///
/// This is the bracket that appears in the Gaussian expectation of the
/// Yukawa term: <exp(-mu d)/d> = sqrt(2/pi)/s * yukawa_bracket(mu s / sqrt 2).
pub fn yukawa_bracket(x: f64) -> f64 {
    assert!(x >= 0.0);
    if x < CF_SWITCH {
        1.0 - PI.sqrt() * x * erfcx(x)
    } else {
        // sqrt(pi) erfcx(x) = 1/D with D = x + (1/2)/Q, so 1 - x/D = (1/(2Q))/D.
        let q = laplace_cf_tail(x);
        let d = x + 0.5 / q;
        (0.5 / q) / d
    }
}

/// Depth of the continued fraction; converges quickly for x >= 3.
fn cf_terms(x: f64) -> usize {
    if x > 50.0 {
        8
    } else if x > 10.0 {
        40
    } else {
        160
    }
}

/// D(x) = x + (1/2)/(x + 1/(x + (3/2)/(x + ...))), with sqrt(pi) erfcx(x) = 1/D.
fn laplace_cf(x: f64) -> f64 {
    x + 0.5 / laplace_cf_tail(x)
}

/// Q(x) = x + 1/(x + (3/2)/(x + 2/(x + ...))).
fn laplace_cf_tail(x: f64) -> f64 {
    let n = cf_terms(x);
    let mut t = x;
    for k in (2..=n).rev() {
        t = x + (k as f64) * 0.5 / t;
    }
    t
}
