//! Pair-potential kernels in natural units (potential per unit mass squared,
//! lengths in l0).
//!
//! * Newtonian: `K(r) = -1/r`
//! * nonlocal (idg): `K(r) = -erf(beta r / 2)/r`, finite at the origin
//! * Yukawa: `K(r) = -(1 + exp(-mu r)/3)/r`
//!
//! Quadratures against the kernels go through [`GravityKernel::r_times_kernel`],
//! which is finite at `r = 0` for every model; the `4 pi r^2` measure supplies
//! the remaining factor of `r`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gk15_centered, integrate_with_breaks, Tolerance};
use crate::special::{erf, erf_over_x, FRAC_1_SQRT_PI};
use crate::units::{Model, NaturalScales};

/// `ln(1e30)`: the form factor `exp(-k^2/beta^2)` is truncated where it drops below 1e-30.
const FORM_FACTOR_CUTOFF: f64 = 69.077_552_789_821_37;

/// Upper bound on oscillation panels used by the spectral inversion.
const MAX_OSCILLATION_PANELS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityKernel {
    pub model: Model,
    /// Dimensionless M_s (idg only).
    pub beta: f64,
    /// Dimensionless Yukawa inverse range (yukawa only).
    pub mu: f64,
    /// Overall coupling; 1 in natural units, 0 switches gravity off.
    pub strength: f64,
}

impl GravityKernel {
    pub fn newtonian() -> Self {
        Self {
            model: Model::Newtonian,
            beta: 0.0,
            mu: 0.0,
            strength: 1.0,
        }
    }

    pub fn idg(beta: f64) -> Self {
        Self {
            model: Model::Idg,
            beta,
            mu: 0.0,
            strength: 1.0,
        }
    }

    pub fn yukawa(mu: f64) -> Self {
        Self {
            model: Model::Yukawa,
            beta: 0.0,
            mu,
            strength: 1.0,
        }
    }

    pub fn from_scales(model: Model, s: &NaturalScales) -> Self {
        match model {
            Model::Newtonian => Self::newtonian(),
            Model::Idg => Self::idg(s.beta),
            Model::Yukawa => Self::yukawa(s.mu),
        }
    }

    pub fn with_strength(self, strength: f64) -> Self {
        Self { strength, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.model {
            Model::Newtonian => true,
            Model::Idg => self.beta.is_finite() && self.beta > 0.0,
            Model::Yukawa => self.mu.is_finite() && self.mu > 0.0,
        };
        if ok && self.strength.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid kernel parameters {self:?}")))
        }
    }

    /// `K(r)`. Errors at `r = 0` for the singular kernels.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r < 0.0 {
            return Err(Error::Domain(format!(
                "radius must be nonnegative, got {r}"
            )));
        }
        if r == 0.0 {
            return match self.model {
                Model::Idg => Ok(-self.strength * self.beta * FRAC_1_SQRT_PI),
                m => Err(Error::SingularInput { model: m.as_str() }),
            };
        }
        let x = 0.5 * self.beta * r;
        Ok(match self.model {
            // erf(x)/x keeps full precision for tiny beta r; beyond that
            // -erf(x)/r cannot round below the Newtonian -1/r
            Model::Idg if x < 1.0 => -self.strength * 0.5 * self.beta * erf_over_x(x),
            _ => self.r_times_kernel(r) / r,
        })
    }

    /// `r K(r)`, finite for all `r >= 0`.
    #[inline]
    pub fn r_times_kernel(&self, r: f64) -> f64 {
        let v = match self.model {
            Model::Newtonian => -1.0,
            Model::Idg => -erf(0.5 * self.beta * r),
            Model::Yukawa => -(1.0 + (-self.mu * r).exp() / 3.0),
        };
        self.strength * v
    }

    /// Average of `K(|x - x'|)` over the sphere `|x'| = rp`, evaluated at `|x| = r`.
    ///
    /// Equals `(1/(2 r rp)) * int_{|r-rp|}^{r+rp} s K(s) ds`.
    pub fn shell_average(&self, r: f64, rp: f64) -> f64 {
        let (small, large) = if r < rp { (r, rp) } else { (rp, r) };
        if small == 0.0 {
            return self.eval(large).unwrap_or(f64::NEG_INFINITY);
        }
        let width = 2.0 * small;
        let integral = match self.model {
            Model::Newtonian => -width,
            Model::Yukawa => {
                let lo = large - small;
                -width + (-self.mu * lo).exp() * (-self.mu * width).exp_m1() / (3.0 * self.mu)
            }
            Model::Idg => {
                if self.beta * width < 1.0 {
                    let mut f = |s: f64| -erf(0.5 * self.beta * s);
                    gk15_centered(&mut f, large, small).0
                } else {
                    idg_antiderivative(self.beta, large + small)
                        - idg_antiderivative(self.beta, large - small)
                }
            }
        };
        self.strength * integral / (2.0 * r * rp)
    }
}

/// Antiderivative of `-erf(beta s / 2)` in `s`.
fn idg_antiderivative(beta: f64, s: f64) -> f64 {
    let x = 0.5 * beta * s;
    -(s * erf(x) + 2.0 * FRAC_1_SQRT_PI / beta * (-x * x).exp())
}

/// Position-space nonlocal kernel recovered from its momentum-space Green function.
///
/// Inverts `-4 pi exp(-k^2/beta^2) / k^2` with the 3D radial Fourier transform,
/// `K(r) = -(2/pi) int_0^inf exp(-k^2/beta^2) sin(k r)/(k r) dk`, truncating at
/// the wavenumber where the Gaussian factor falls below 1e-30.
pub fn kernel_from_form_factor(beta: f64, r: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) || r.is_nan() || r < 0.0 {
        return Err(Error::Domain(format!(
            "need beta > 0 and r >= 0, got beta={beta}, r={r}"
        )));
    }
    // k = beta q
    let q_max = FORM_FACTOR_CUTOFF.sqrt();
    let x = beta * r;
    let integrand = |q: f64| {
        let arg = q * x;
        let sinc = if arg.abs() < 1e-4 {
            1.0 - arg * arg / 6.0
        } else {
            arg.sin() / arg
        };
        (-q * q).exp() * sinc
    };
    // panels at the zeros of sin(q x)
    let mut points = vec![0.0];
    if x > 0.0 {
        let period = PI / x;
        let n = ((q_max / period).floor() as usize).min(MAX_OSCILLATION_PANELS);
        let step = if n == MAX_OSCILLATION_PANELS {
            q_max / n as f64
        } else {
            period
        };
        points.extend((1..=n).map(|i| i as f64 * step).filter(|&q| q < q_max));
    }
    points.push(q_max);
    let tol = Tolerance {
        abs: 1e-16,
        rel: 1e-12,
        max_intervals: 4 * MAX_OSCILLATION_PANELS,
    };
    let est = integrate_with_breaks(integrand, &points, tol)?;
    Ok(-2.0 * beta / PI * est.value)
}

/// Potential at the packet centre for the normalized Gaussian
/// `phi(x) = pi^{-3/4} sigma^{-3/2} exp(-x^2 / 2 sigma^2)`.
pub fn potential_at_origin(k: &GravityKernel, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    k.validate()?;
    let norm = 4.0 * PI / (PI.powf(1.5) * sigma.powi(3));
    let r_max = 10.0 * sigma;
    let mut points = vec![0.0];
    let feature = match k.model {
        Model::Idg => 2.0 / k.beta,
        Model::Yukawa => 1.0 / k.mu,
        Model::Newtonian => r_max,
    };
    for f in [feature, 4.0 * feature, 16.0 * feature] {
        if f < r_max && f > points[points.len() - 1] {
            points.push(f);
        }
    }
    points.push(r_max);
    let est = integrate_with_breaks(
        |r| norm * r * (-(r * r) / (sigma * sigma)).exp() * k.r_times_kernel(r),
        &points,
        Tolerance::relative(1e-13),
    )?;
    Ok(est.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::FRAC_2_SQRT_PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn idg_origin_limit() {
        let k = GravityKernel::idg(2.5);
        let at0 = k.eval(0.0).unwrap();
        assert_eq!(at0, -2.5 * FRAC_1_SQRT_PI);
        assert!(rel(k.eval(1e-9).unwrap(), at0) < 1e-15);
    }

    #[test]
    fn idg_saturates_to_newtonian() {
        let beta = 3.0;
        let r = 40.0 / beta;
        assert!(rel(GravityKernel::idg(beta).eval(r).unwrap(), -1.0 / r) < 1e-10);
    }

    #[test]
    fn idg_at_beta_one_r_two() {
        // erf(1) to 30 digits: 0.842700792949714869341220635083
        let v = GravityKernel::idg(1.0).eval(2.0).unwrap();
        assert!(rel(v, -0.842_700_792_949_714_9 / 2.0) < 1e-15);
    }

    #[test]
    fn singular_models_reject_origin() {
        assert!(matches!(
            GravityKernel::newtonian().eval(0.0),
            Err(Error::SingularInput { .. })
        ));
        assert!(matches!(
            GravityKernel::yukawa(1.0).eval(0.0),
            Err(Error::SingularInput { .. })
        ));
        assert!(GravityKernel::newtonian().eval(-1.0).is_err());
    }

    #[test]
    fn yukawa_limits() {
        let r = 0.7;
        let far = GravityKernel::yukawa(1e4).eval(r).unwrap();
        assert!(rel(far, -1.0 / r) < 1e-14);
        let near = GravityKernel::yukawa(1e-12).eval(r).unwrap();
        assert!(rel(near, -4.0 / (3.0 * r)) < 1e-11);
    }

    #[test]
    fn shell_average_newtonian_is_inverse_max() {
        let k = GravityKernel::newtonian();
        assert!(rel(k.shell_average(2.0, 5.0), -0.2) < 1e-15);
        assert!(rel(k.shell_average(5.0, 2.0), -0.2) < 1e-15);
        assert!(rel(k.shell_average(3.0, 3.0), -1.0 / 3.0) < 1e-15);
    }

    /// Brute-force angular average of K(|x - x'|) by the midpoint rule in
    /// u = sin(theta/2), which removes the 1/d endpoint singularity.
    fn angular_oracle(k: &GravityKernel, r: f64, rp: f64) -> f64 {
        let n = 20_000;
        let mut acc = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let d = ((r - rp).powi(2) + 4.0 * r * rp * u * u).sqrt();
            // d(cos theta) = -4u du over an interval of length 2
            acc += 2.0 * u * k.r_times_kernel(d) / d;
        }
        acc / n as f64
    }

    #[test]
    fn shell_average_matches_angular_oracle() {
        for k in [
            GravityKernel::idg(0.7),
            GravityKernel::idg(30.0),
            GravityKernel::yukawa(1.3),
        ] {
            for &(r, rp) in &[(0.5, 3.0), (2.0, 2.1), (10.0, 0.01), (1.0, 1.0)] {
                let a = k.shell_average(r, rp);
                let b = angular_oracle(&k, r, rp);
                assert!(rel(a, b) < 1e-7, "{k:?} r={r} rp={rp}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn shell_average_branches_agree_at_switch() {
        let k = GravityKernel::idg(1.0);
        let r = 4.0;
        let a = k.shell_average(r, 0.499_999_9);
        let b = k.shell_average(r, 0.500_000_1);
        assert!(rel(a, b) < 1e-9, "{a} {b}");
        // tiny inner shell reduces to the kernel itself
        assert!(rel(k.shell_average(r, 1e-9), k.eval(r).unwrap()) < 1e-12);
    }

    #[test]
    fn form_factor_inversion_matches_closed_form() {
        for &beta in &[0.1, 1.0, 17.0] {
            for &x in &[0.0, 1e-3, 0.3, 1.0, 5.0, 40.0, 100.0] {
                let r = x / beta;
                let spectral = kernel_from_form_factor(beta, r).unwrap();
                let closed = GravityKernel::idg(beta).eval(r).unwrap();
                assert!(
                    rel(spectral, closed) < 1e-9,
                    "beta={beta} r={r}: {spectral} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn form_factor_large_beta_is_newtonian() {
        let r = 0.37;
        let v = kernel_from_form_factor(1e4, r).unwrap();
        assert!(rel(v, -1.0 / r) < 1e-9);
    }

    #[test]
    fn potential_at_origin_limits() {
        // Gaussian density against erf kernel: -(2/sqrt pi) / sqrt(sigma^2 + 4/beta^2)
        let closed =
            |beta: f64, sigma: f64| -FRAC_2_SQRT_PI / (sigma * sigma + 4.0 / (beta * beta)).sqrt();
        for &(beta, sigma) in &[(1.0, 1.0), (1e-3, 1.0), (1e3, 1.0), (5.0, 0.01)] {
            let v = potential_at_origin(&GravityKernel::idg(beta), sigma).unwrap();
            assert!(rel(v, closed(beta, sigma)) < 1e-11, "{beta} {sigma}");
        }
        // plateau: beta sigma -> 0
        let v = potential_at_origin(&GravityKernel::idg(1e-6), 1.0).unwrap();
        assert!(rel(v, -1e-6 * FRAC_1_SQRT_PI) < 1e-9);
        // Newtonian is finite: -2/(sqrt(pi) sigma)
        let v = potential_at_origin(&GravityKernel::newtonian(), 1.0).unwrap();
        assert!(rel(v, -FRAC_2_SQRT_PI) < 1e-13);
        let near_newton = potential_at_origin(&GravityKernel::idg(1e3), 1.0).unwrap();
        assert!(rel(near_newton, v) < 1e-5);
    }
}
