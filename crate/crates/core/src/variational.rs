//! Gaussian-ansatz energies and their minimization over the width.
//!
//! For the normalized packet `phi ~ exp(-r^2 / 2 sigma^2)` the kinetic term is
//! `3/(4 s^2)` and the interaction is the kernel averaged over the relative
//! separation of two independent draws from `phi^2`, which is Maxwellian with
//! per-component variance `s^2`. In natural units (lengths in l0, energies in
//! `G m^2 / l0`):
//!
//! ```text
//! E_N(s)   = 3/(4 s^2) - sqrt(2/pi) / s
//! E_IDG(s) = 3/(4 s^2) - sqrt(2/pi) beta / sqrt(2 + beta^2 s^2)
//! E_Y(s)   = 3/(4 s^2) - sqrt(2/pi) / s * (1 + B(mu s / sqrt 2) / 3)
//! ```
//!
//! with `B(x) = 1 - sqrt(pi) x erfcx(x)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::GravityKernel;
use crate::quadrature::{integrate_with_breaks, Tolerance};
use crate::special::{erfcx, yukawa_bracket};
use crate::units::{natural_scales, Model, PhysicalParams};

/// sqrt(2/pi)
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Log-spacing of the width scan, in decades.
pub const SCAN_STEP_DECADES: f64 = 0.05;
/// Default scan window in log10(s); widened to cover the analytic anchors.
pub const SCAN_WINDOW: (f64, f64) = (-12.0, 12.0);
/// Root polishing stops once the bracket in log10(s) is this narrow.
pub const BRACKET_TOLERANCE: f64 = 1e-14;
/// Acceptance threshold on the scaled stationarity residual.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;
/// `beta sigma` threshold separating the deep-nonlocal and Newtonian regimes.
pub const REGIME_THRESHOLD: f64 = 2.0;
/// Multiplicative half-width of the crossover band around the threshold.
pub const REGIME_BAND: f64 = 1.5;

/// Normalized Gaussian trial packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianAnsatz {
    pub sigma: f64,
}

impl GaussianAnsatz {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Self { sigma })
        } else {
            Err(Error::Domain(format!(
                "sigma must be positive, got {sigma}"
            )))
        }
    }

    /// `phi(r)`
    pub fn amplitude(&self, r: f64) -> f64 {
        let s = self.sigma;
        (-(r * r) / (2.0 * s * s)).exp() / (PI.powf(0.75) * s.powf(1.5))
    }

    pub fn density(&self, r: f64) -> f64 {
        self.amplitude(r).powi(2)
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.75 / (self.sigma * self.sigma)
    }
}

pub fn energy_newton(sigma: f64) -> f64 {
    0.75 / (sigma * sigma) - SQRT_2_OVER_PI / sigma
}

pub fn energy_idg(sigma: f64, beta: f64) -> f64 {
    0.75 / (sigma * sigma) - SQRT_2_OVER_PI / sigma * idg_screening(beta * sigma)
}

/// `x / sqrt(2 + x^2)`: the Gaussian-averaged nonlocal kernel relative to the
/// Newtonian one at `x = beta sigma`. Written so that it never exceeds one in
/// floating point, which keeps `E_IDG >= E_N` exact near the Newtonian limit.
pub fn idg_screening(x: f64) -> f64 {
    if x < 1.0 {
        x / (2.0 + x * x).sqrt()
    } else {
        (1.0 + 2.0 / (x * x)).sqrt().recip()
    }
}

/// Yukawa energy by direct quadrature over the relative separation.
pub fn energy_yukawa(sigma: f64, mu: f64) -> Result<f64> {
    GaussianAnsatz::new(sigma)?;
    let w = gaussian_pair_expectation(&GravityKernel::yukawa(mu), sigma)?;
    Ok(0.75 / (sigma * sigma) + w)
}

/// Closed form of [`energy_yukawa`].
pub fn energy_yukawa_closed(sigma: f64, mu: f64) -> f64 {
    let x = mu * sigma / std::f64::consts::SQRT_2;
    0.75 / (sigma * sigma) - SQRT_2_OVER_PI / sigma * (1.0 + yukawa_bracket(x) / 3.0)
}

/// `<K(d)>` for `d` the separation of two independent points drawn from the
/// Gaussian density of width `sigma`: a Maxwell distribution with scale `sigma`.
pub fn gaussian_pair_expectation(k: &GravityKernel, sigma: f64) -> Result<f64> {
    k.validate()?;
    let s2 = sigma * sigma;
    let norm = 4.0 * PI / (2.0 * PI * s2).powf(1.5);
    let d_max = sigma * 150f64.sqrt();
    let mut points = vec![0.0];
    let feature = match k.model {
        Model::Idg => 2.0 / k.beta,
        Model::Yukawa => 1.0 / k.mu,
        Model::Newtonian => d_max,
    };
    for f in [feature, 8.0 * feature, 40.0 * feature] {
        if f < d_max && f > points[points.len() - 1] {
            points.push(f);
        }
    }
    points.push(d_max);
    let est = integrate_with_breaks(
        |d| norm * d * (-(d * d) / (2.0 * s2)).exp() * k.r_times_kernel(d),
        &points,
        Tolerance::relative(1e-14),
    )?;
    Ok(est.value)
}

/// One-dimensional width problem: `E(s) = kinetic * 3/(4 s^2) + W(s)`.
///
/// `kinetic` is `l0 / L` when lengths are measured in a unit `L`; the kernel
/// ranges are then expressed in `1/L` and energies in `G m^2 / L`.
#[derive(Debug, Clone, Copy)]
pub struct SpreadProblem {
    pub kinetic: f64,
    pub kernel: GravityKernel,
}

impl SpreadProblem {
    pub fn interaction(&self, s: f64) -> f64 {
        let k = &self.kernel;
        k.strength
            * match k.model {
                Model::Newtonian => -SQRT_2_OVER_PI / s,
                Model::Idg => -SQRT_2_OVER_PI / s * idg_screening(k.beta * s),
                Model::Yukawa => {
                    -SQRT_2_OVER_PI / s
                        * (1.0 + yukawa_bracket(k.mu * s / std::f64::consts::SQRT_2) / 3.0)
                }
            }
    }

    pub fn d_interaction(&self, s: f64) -> f64 {
        let k = &self.kernel;
        k.strength
            * match k.model {
                Model::Newtonian => SQRT_2_OVER_PI / (s * s),
                Model::Idg => SQRT_2_OVER_PI / (s * s) * idg_screening(k.beta * s).powi(3),
                Model::Yukawa => {
                    let x = k.mu * s / std::f64::consts::SQRT_2;
                    let b = yukawa_bracket(x);
                    let db = if x < 5.0 {
                        2.0 * x - PI.sqrt() * (1.0 + 2.0 * x * x) * erfcx(x)
                    } else {
                        2.0 * x * b - (1.0 - b) / x
                    };
                    SQRT_2_OVER_PI / (s * s) * (1.0 + b / 3.0)
                        - SQRT_2_OVER_PI / s * db * (k.mu / std::f64::consts::SQRT_2) / 3.0
                }
            }
    }

    pub fn energy(&self, s: f64) -> f64 {
        0.75 * self.kinetic / (s * s) + self.interaction(s)
    }

    pub fn d_energy(&self, s: f64) -> f64 {
        -1.5 * self.kinetic / (s * s * s) + self.d_interaction(s)
    }

    /// `s^3 dE/ds / (3/2 kinetic)`: same sign as `dE/ds`, O(1) near the root.
    pub fn scaled_residual(&self, s: f64) -> f64 {
        -1.0 + s * s * s * self.d_interaction(s) / (1.5 * self.kinetic)
    }

    /// Widths that must lie inside the scan window.
    fn anchors(&self) -> Vec<f64> {
        let newton = 1.5 * self.kinetic / SQRT_2_OVER_PI;
        let mut a = vec![newton];
        match self.kernel.model {
            Model::Newtonian => {}
            Model::Idg => {
                let b = self.kernel.beta;
                a.push((3.0 * PI.sqrt() * self.kinetic / (b * b * b)).powf(0.25));
            }
            Model::Yukawa => a.push(0.75 * newton),
        }
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NewtonianLimit,
    Crossover,
    DeepNonlocal,
}

impl Regime {
    pub fn classify(beta_sigma: f64) -> Self {
        if beta_sigma < REGIME_THRESHOLD / REGIME_BAND {
            Regime::DeepNonlocal
        } else if beta_sigma > REGIME_THRESHOLD * REGIME_BAND {
            Regime::NewtonianLimit
        } else {
            Regime::Crossover
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::NewtonianLimit => "newtonian_limit",
            Regime::Crossover => "crossover",
            Regime::DeepNonlocal => "deep_nonlocal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadResult {
    pub sigma_m: f64,
    /// Optimal width in units of l0.
    pub sigma_natural: f64,
    /// Energy at the optimum in units of `G m^2 / l0`.
    pub energy_natural: f64,
    pub model: Model,
    /// Only meaningful for the nonlocal kernel; Newtonian runs report `newtonian_limit`.
    pub regime: Option<Regime>,
    /// `beta sigma` (idg) or `mu sigma` (yukawa).
    pub range_ratio: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub scan_points: usize,
    /// Final root bracket in meters.
    pub bracket_m: (f64, f64),
}

struct Root {
    t: f64,
    bracket: (f64, f64),
    iterations: usize,
}

/// Brent's method (bisection + secant/inverse quadratic interpolation) on `[a, b]`.
fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Root {
    let mut fa = f(a);
    let mut fb = f(b);
    debug_assert!(fa * fb <= 0.0);
    if fa == 0.0 {
        return Root {
            t: a,
            bracket: (a, a),
            iterations: 0,
        };
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=max_iter {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            let (lo, hi) = if b < c { (b, c) } else { (c, b) };
            return Root {
                t: b,
                bracket: (lo, hi),
                iterations: iter,
            };
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    let (lo, hi) = if b < c { (b, c) } else { (c, b) };
    Root {
        t: b,
        bracket: (lo, hi),
        iterations: max_iter,
    }
}

/// Stationary width of a [`SpreadProblem`], globally minimizing the energy.
#[derive(Debug, Clone, Copy)]
pub struct WidthSolution {
    pub s: f64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub scan_points: usize,
    pub bracket: (f64, f64),
}

pub fn minimize_width(problem: &SpreadProblem) -> Result<WidthSolution> {
    let (mut lo, mut hi) = SCAN_WINDOW;
    for a in problem.anchors() {
        let l = a.log10();
        if l.is_finite() {
            lo = lo.min((l - 6.0).floor());
            hi = hi.max((l + 6.0).ceil());
        }
    }
    let n = ((hi - lo) / SCAN_STEP_DECADES).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * SCAN_STEP_DECADES).collect();
    let rho = |t: f64| problem.scaled_residual(10f64.powf(t));
    let values: Vec<f64> = grid.iter().map(|&t| rho(t)).collect();

    let mut best: Option<WidthSolution> = None;
    for i in 0..n {
        let (r0, r1) = (values[i], values[i + 1]);
        // dE/ds crossing from negative to positive marks a local minimum
        if !(r0 < 0.0 && r1 >= 0.0) {
            continue;
        }
        let root = brent(rho, grid[i], grid[i + 1], BRACKET_TOLERANCE, 200);
        let s = 10f64.powf(root.t);
        let cand = WidthSolution {
            s,
            energy: problem.energy(s),
            residual: rho(root.t),
            iterations: root.iterations,
            scan_points: grid.len(),
            bracket: (10f64.powf(root.bracket.0), 10f64.powf(root.bracket.1)),
        };
        if best.is_none_or(|b| cand.energy < b.energy) {
            best = Some(cand);
        }
    }
    match best {
        Some(b) if b.energy < 0.0 => Ok(b),
        _ => Err(Error::NoMinimum {
            lo,
            hi,
            profile: grid
                .iter()
                .map(|&t| (t, problem.energy(10f64.powf(t))))
                .collect(),
        }),
    }
}

/// Optimal Gaussian width for a physical instance, in the gravitational length unit.
pub fn minimize_spread(p: &PhysicalParams) -> Result<SpreadResult> {
    minimize_spread_in_unit(p, None)
}

/// As [`minimize_spread`], but solving with lengths measured in `unit_m` meters.
pub fn minimize_spread_in_unit(p: &PhysicalParams, unit_m: Option<f64>) -> Result<SpreadResult> {
    let scales = natural_scales(p)?;
    let unit = unit_m.unwrap_or(scales.l0_m);
    if !(unit > 0.0 && unit.is_finite()) {
        return Err(Error::Domain(format!(
            "length unit must be positive, got {unit}"
        )));
    }
    let ratio = unit / scales.l0_m;
    let kernel = GravityKernel {
        beta: scales.beta * ratio,
        mu: scales.mu * ratio,
        ..GravityKernel::from_scales(p.model, &scales)
    };
    let problem = SpreadProblem {
        kinetic: 1.0 / ratio,
        kernel,
    };
    let sol = minimize_width(&problem)?;
    if sol.residual.abs() >= RESIDUAL_TOLERANCE {
        return Err(Error::NonConvergence {
            iterations: sol.iterations,
            residual: sol.residual,
            history: vec![sol.residual],
        });
    }
    let sigma_natural = sol.s * ratio;
    let energy_natural = match p.model {
        // quadrature is authoritative for Yukawa
        Model::Yukawa => energy_yukawa(sigma_natural, scales.mu)?,
        _ => sol.energy * ratio,
    };
    let (regime, range_ratio) = match p.model {
        Model::Newtonian => (Some(Regime::NewtonianLimit), None),
        Model::Idg => {
            let bs = scales.beta * sigma_natural;
            (Some(Regime::classify(bs)), Some(bs))
        }
        Model::Yukawa => (None, Some(scales.mu * sigma_natural)),
    };
    Ok(SpreadResult {
        sigma_m: sol.s * unit,
        sigma_natural,
        energy_natural,
        model: p.model,
        regime,
        range_ratio,
        residual: sol.residual,
        iterations: sol.iterations,
        scan_points: sol.scan_points,
        bracket_m: (sol.bracket.0 * unit, sol.bracket.1 * unit),
    })
}

/// Optimal Newtonian width `(3/2) sqrt(pi/2) hbar^2 / (G m^3)` in meters.
pub fn sigma_newton_closed_form(p: &PhysicalParams) -> Result<f64> {
    let s = natural_scales(&PhysicalParams::newtonian(p.mass_kg))?;
    Ok(1.5 * (PI / 2.0).sqrt() * s.l0_m)
}

/// Small-`M_s sigma` approximation `(3 sqrt pi)^{1/4} l0^{1/4} (hbar c / M_s)^{3/4}` in meters.
pub fn sigma_idg_asymptotic(p: &PhysicalParams) -> Result<f64> {
    if p.model != Model::Idg {
        return Err(Error::Domain(
            "asymptotic width requires the idg model".into(),
        ));
    }
    let s = natural_scales(p)?;
    let lambda = s.hbar_c_ev_m / p.ms_ev.expect("validated");
    Ok((3.0 * PI.sqrt()).powf(0.25) * s.l0_m.powf(0.25) * lambda.powf(0.75))
}

#[derive(Debug)]
pub struct SweepRow {
    pub params: PhysicalParams,
    pub result: Result<SpreadResult>,
}

/// Solve every (mass, template) combination; rows are mass-major in input order.
pub fn sweep(masses: &[f64], templates: &[PhysicalParams]) -> Result<Vec<SweepRow>> {
    if masses.is_empty() || templates.is_empty() {
        return Err(Error::Domain(
            "sweep needs at least one mass and one model".into(),
        ));
    }
    let jobs: Vec<PhysicalParams> = masses
        .iter()
        .flat_map(|&m| templates.iter().map(move |t| t.with_mass(m)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|params| SweepRow {
            params,
            result: minimize_spread(&params),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn newton_minimizer_closed_form() {
        let s_star = 1.5 * (PI / 2.0).sqrt();
        let h = 1e-5;
        let d = (energy_newton(s_star + h) - energy_newton(s_star - h)) / (2.0 * h);
        assert!(d.abs() < 1e-9);
        assert!(energy_newton(1e8) < 0.0 && energy_newton(1e8) > -1e-8);
        assert!(energy_newton(1e-8) > 1e15);
    }

    #[test]
    fn idg_recovers_newton_for_large_beta() {
        for &s in &[0.3, 1.0, 7.0] {
            assert!(rel(energy_idg(s, 1e9), energy_newton(s)) < 1e-12);
        }
    }

    #[test]
    fn yukawa_limits() {
        let s = 1.3;
        assert!(rel(energy_yukawa_closed(s, 1e6), energy_newton(s)) < 1e-10);
        let four_thirds = 0.75 / (s * s) - 4.0 / 3.0 * SQRT_2_OVER_PI / s;
        assert!(rel(energy_yukawa_closed(s, 1e-9), four_thirds) < 1e-8);
    }

    #[test]
    fn yukawa_closed_form_matches_quadrature() {
        for &s in &[0.05, 0.7, 1.9, 30.0] {
            for &mu in &[1e-3, 0.5, 2.0, 40.0, 1e4] {
                let q = energy_yukawa(s, mu).unwrap();
                let c = energy_yukawa_closed(s, mu);
                assert!(
                    (q - c).abs() <= 1e-11 * c.abs().max(0.75 / (s * s)),
                    "s={s} mu={mu}: {q} vs {c}"
                );
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        for kernel in [
            GravityKernel::newtonian(),
            GravityKernel::idg(0.8),
            GravityKernel::yukawa(0.6),
            GravityKernel::yukawa(9.0),
        ] {
            let p = SpreadProblem {
                kinetic: 1.0,
                kernel,
            };
            for &s in &[0.4, 1.7, 5.0] {
                let h = 1e-5 * s;
                let fd = (p.energy(s + h) - p.energy(s - h)) / (2.0 * h);
                assert!(
                    (fd - p.d_energy(s)).abs() < 1e-7 * fd.abs().max(1e-3),
                    "{kernel:?} s={s}"
                );
            }
        }
    }

    #[test]
    fn newtonian_spread_matches_closed_form() {
        let p = PhysicalParams::newtonian(1e-14);
        let r = minimize_spread(&p).unwrap();
        let c = sigma_newton_closed_form(&p).unwrap();
        assert!(rel(r.sigma_m, c) < 1e-10);
        assert!(rel(c, 3.1322e-16) < 1e-3, "{c}");
        assert!(r.residual.abs() < RESIDUAL_TOLERANCE);
        let big = sigma_newton_closed_form(&PhysicalParams::newtonian(1e-10)).unwrap();
        assert!(rel(c / big, 1e12) < 1e-12);
    }

    #[test]
    fn asymptotic_identity_and_scaling() {
        let p = PhysicalParams::idg(1e-14, 0.004);
        let a = sigma_idg_asymptotic(&p).unwrap();
        let sn = sigma_newton_closed_form(&p).unwrap();
        let lambda = crate::units::nonlocality_length_m(0.004);
        let b = (2.0 * 2f64.sqrt()).powf(0.25) * sn.powf(0.25) * lambda.powf(0.75);
        assert!(rel(a, b) < 1e-13);
        let heavier = sigma_idg_asymptotic(&p.with_mass(1e-13)).unwrap();
        assert!(rel(a / heavier, 10f64.powf(0.75)) < 1e-13);
        assert!(sigma_idg_asymptotic(&PhysicalParams::newtonian(1e-14)).is_err());
    }

    #[test]
    fn regime_classification() {
        assert_eq!(Regime::classify(1e-3), Regime::DeepNonlocal);
        assert_eq!(Regime::classify(2.0), Regime::Crossover);
        assert_eq!(Regime::classify(100.0), Regime::NewtonianLimit);
    }

    #[test]
    fn table_cells_within_five_percent() {
        let cases = [
            (PhysicalParams::newtonian(1e-14), 3.02e-16),
            (PhysicalParams::idg(1e-14, 0.004), 1.01e-7),
            (PhysicalParams::idg(1e-16, 1e9), 3.02e-10),
        ];
        for (p, target) in cases {
            let r = minimize_spread(&p).unwrap();
            assert!(rel(r.sigma_m, target) < 0.05, "{p:?}: {}", r.sigma_m);
        }
    }

    #[test]
    fn no_minimum_reports_profile() {
        let repulsive = SpreadProblem {
            kinetic: 1.0,
            kernel: GravityKernel::newtonian().with_strength(-1.0),
        };
        match minimize_width(&repulsive) {
            Err(Error::NoMinimum { profile, .. }) => assert!(!profile.is_empty()),
            other => panic!("expected NoMinimum, got {other:?}"),
        }
    }

    #[test]
    fn sweep_is_ordered_and_reports_per_row() {
        let templates = [
            PhysicalParams::newtonian(1.0),
            PhysicalParams::idg(1.0, 1.0),
        ];
        let rows = sweep(&[1e-12, 1e-14], &templates).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].params.mass_kg, 1e-12);
        assert_eq!(rows[1].params.model, Model::Idg);
        assert_eq!(rows[2].params.mass_kg, 1e-14);
        assert!(rows.iter().all(|r| r.result.is_ok()));
        let bad = sweep(&[1e-12, -1.0], &templates[..1]).unwrap();
        assert!(bad[0].result.is_ok() && bad[1].result.is_err());
        assert!(sweep(&[], &templates).is_err());
    }
}
