//! Real-time propagation of the self-gravitating Schrodinger equation.
//!
//! Strang splitting on `u = r R`: a Crank-Nicolson kinetic half-step, a
//! potential phase `exp(-i Phi dt)` with `Phi` rebuilt from the current
//! density, and a second kinetic half-step. Both pieces are unitary in the
//! grid inner product, so the norm is conserved to roundoff.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundstate::RadialState;
use crate::kernels::GravityKernel;
use crate::radial::{RadialGrid, SelfGravity};
use crate::units::{natural_scales, PhysicalParams};

/// Upper bound on `dt / h^2`.
///
/// Crank-Nicolson is unconditionally stable, so this is an accuracy guard:
/// the highest grid mode `k = pi/h` picks up a phase `dt k^2 / 2` per step,
/// and past this bound that phase wraps many times and the scheme no longer
/// resolves the grid it runs on.
pub const C_STAB: f64 = 50.0;

/// One-step norm drift that aborts a run.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub steps: usize,
    pub observables_stride: usize,
    /// Switch the self-interaction off for the free control run.
    pub gravity_off: bool,
}

impl EvolutionConfig {
    pub fn new(dt: f64, steps: usize) -> Self {
        Self {
            dt,
            steps,
            observables_stride: 1,
            gravity_off: false,
        }
    }

    pub fn free(mut self) -> Self {
        self.gravity_off = true;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.observables_stride = stride;
        self
    }

    pub fn validate(&self, grid: &RadialGrid) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.observables_stride == 0 {
            return Err(Error::Domain(
                "observables_stride must be at least 1".into(),
            ));
        }
        let bound = C_STAB * grid.h * grid.h;
        if self.dt >= bound {
            return Err(Error::Domain(format!(
                "dt = {} exceeds the stability bound {bound} for h = {}",
                self.dt, grid.h
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub widths: Vec<f64>,
    pub norms: Vec<f64>,
    pub energies_f: Vec<f64>,
}

impl Trajectory {
    pub fn max_norm_drift(&self) -> f64 {
        self.norms
            .iter()
            .map(|n| (n - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let f0 = self.energies_f[0];
        self.energies_f
            .iter()
            .map(|f| ((f - f0) / f0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_width_deviation(&self) -> f64 {
        let w0 = self.widths[0];
        self.widths
            .iter()
            .map(|w| ((w - w0) / w0).abs())
            .fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Prefactored `(1 + i a L)` for `L = -(1/2) D2`, plus the explicit side.
struct CrankNicolson {
    diag: Complex64,
    off: Complex64,
    /// Forward-elimination multipliers.
    mult: Vec<Complex64>,
    /// Pivots after elimination.
    pivot: Vec<Complex64>,
}

impl CrankNicolson {
    fn new(grid: &RadialGrid, half_dt: f64) -> Self {
        let a = 0.5 * half_dt;
        let h2 = grid.h * grid.h;
        let diag = Complex64::new(0.0, a / h2);
        let off = Complex64::new(0.0, -0.5 * a / h2);
        let n = grid.nodes;
        let mut mult = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot = vec![Complex64::new(1.0, 0.0) + diag; n];
        for i in 1..n {
            mult[i] = off / pivot[i - 1];
            pivot[i] -= mult[i] * off;
        }
        Self {
            diag,
            off,
            mult,
            pivot,
        }
    }

    fn step(&self, u: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let n = u.len();
        let one = Complex64::new(1.0, 0.0);
        scratch.clear();
        for i in 0..n {
            let left = if i > 0 {
                u[i - 1]
            } else {
                Complex64::new(0.0, 0.0)
            };
            let right = if i + 1 < n {
                u[i + 1]
            } else {
                Complex64::new(0.0, 0.0)
            };
            scratch.push((one - self.diag) * u[i] - self.off * (left + right));
        }
        for i in 1..n {
            let prev = scratch[i - 1];
            scratch[i] -= self.mult[i] * prev;
        }
        u[n - 1] = scratch[n - 1] / self.pivot[n - 1];
        for i in (0..n - 1).rev() {
            u[i] = (scratch[i] - self.off * u[i + 1]) / self.pivot[i];
        }
    }
}

fn density(u: &[Complex64]) -> Vec<f64> {
    u.iter().map(|v| v.norm_sqr()).collect()
}

/// Propagate under a dimensionless kernel. The grid is the initial state's.
pub fn evolve_with_kernel(
    initial: &RadialState,
    kernel: &GravityKernel,
    cfg: &EvolutionConfig,
) -> Result<Trajectory> {
    let grid = initial.grid;
    cfg.validate(&grid)?;
    let n0 = initial.compute_norm();
    if (n0 - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "initial state is not normalized (norm = {n0})"
        )));
    }
    let kernel = if cfg.gravity_off {
        kernel.with_strength(0.0)
    } else {
        *kernel
    };
    let gravity = SelfGravity::new(&kernel, grid)?;
    let cn = CrankNicolson::new(&grid, 0.5 * cfg.dt);
    let w = grid.weight();

    let mut u: Vec<Complex64> = initial.u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut scratch = Vec::with_capacity(u.len());
    let mut traj = Trajectory::default();
    let record = |t: f64, u: &[Complex64], phi: &[f64], traj: &mut Trajectory| {
        let rho = density(u);
        let interaction = w * rho.iter().zip(phi).map(|(r, p)| r * p).sum::<f64>();
        traj.times.push(t);
        traj.widths.push(grid.width(&rho));
        traj.norms.push(grid.integrate_density(&rho));
        traj.energies_f
            .push(grid.kinetic_energy(u) + 0.5 * interaction);
    };

    let mut phi = gravity.potential(&density(&u));
    record(0.0, &u, &phi, &mut traj);
    let mut norm = n0;
    for step in 1..=cfg.steps {
        cn.step(&mut u, &mut scratch);
        let mid = gravity.potential(&density(&u));
        for (v, p) in u.iter_mut().zip(&mid) {
            *v *= Complex64::from_polar(1.0, -p * cfg.dt);
        }
        cn.step(&mut u, &mut scratch);
        let rho = density(&u);
        let next = grid.integrate_density(&rho);
        let drift = (next - norm).abs();
        if drift.is_nan() || drift > NORM_DRIFT_LIMIT {
            return Err(Error::Stability { step, drift });
        }
        norm = next;
        if step % cfg.observables_stride == 0 || step == cfg.steps {
            phi = gravity.potential(&rho);
            record(step as f64 * cfg.dt, &u, &phi, &mut traj);
        }
    }
    Ok(traj)
}

/// Propagate a state of the physical instance `p`.
pub fn evolve(
    initial: &RadialState,
    p: &PhysicalParams,
    cfg: &EvolutionConfig,
) -> Result<Trajectory> {
    let scales = natural_scales(p)?;
    evolve_with_kernel(initial, &GravityKernel::from_scales(p.model, &scales), cfg)
}

/// Largest relative width excursion while evolving `state`.
pub fn stationarity_check(
    state: &RadialState,
    p: &PhysicalParams,
    cfg: &EvolutionConfig,
) -> Result<f64> {
    if cfg.steps == 0 {
        return Ok(0.0);
    }
    Ok(evolve(state, p, cfg)?.max_width_deviation())
}

/// Width of a free Gaussian of initial width `sigma0` at time `t` (unit mass).
pub fn free_gaussian_width(sigma0: f64, t: f64) -> f64 {
    sigma0 * (1.0 + (t / (sigma0 * sigma0)).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(nodes: usize, r_max: f64, sigma: f64) -> RadialState {
        RadialState::gaussian(RadialGrid::new(nodes, r_max).unwrap(), sigma).unwrap()
    }

    #[test]
    fn free_packet_follows_analytic_law() {
        let s = gaussian(3000, 60.0, 1.0);
        let t_end = 15f64.sqrt();
        let steps = 400;
        let cfg = EvolutionConfig::new(t_end / steps as f64, steps)
            .free()
            .with_stride(10);
        let tr = evolve_with_kernel(&s, &GravityKernel::newtonian(), &cfg).unwrap();
        for (t, w) in tr.times.iter().zip(&tr.widths) {
            let exact = free_gaussian_width(1.0, *t);
            assert!(((w - exact) / exact).abs() < 5e-3, "t={t} {w} {exact}");
        }
        assert!((tr.widths.last().unwrap() - 4.0).abs() < 0.02);
        assert!(tr.max_norm_drift() < 1e-9);
    }

    #[test]
    fn unstable_step_is_rejected() {
        let s = gaussian(100, 10.0, 1.0);
        let h = s.grid.h;
        let cfg = EvolutionConfig::new(2.0 * C_STAB * h * h, 10);
        assert!(matches!(
            evolve_with_kernel(&s, &GravityKernel::newtonian(), &cfg),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn zero_steps_gives_zero_deviation() {
        let s = gaussian(100, 10.0, 1.0);
        let p = PhysicalParams::newtonian(1e-14);
        assert_eq!(
            stationarity_check(&s, &p, &EvolutionConfig::new(1e-3, 0)).unwrap(),
            0.0
        );
        let tr = evolve(&s, &p, &EvolutionConfig::new(1e-3, 0)).unwrap();
        assert_eq!(tr.len(), 1);
    }

    #[test]
    fn self_gravitating_packet_conserves_norm_and_functional() {
        let s = gaussian(800, 40.0, 2.5);
        let cfg = EvolutionConfig::new(0.02, 1000).with_stride(50);
        let tr = evolve_with_kernel(&s, &GravityKernel::newtonian(), &cfg).unwrap();
        assert!(tr.max_norm_drift() < 1e-9, "{}", tr.max_norm_drift());
        assert!(tr.max_energy_drift() < 1e-6, "{}", tr.max_energy_drift());
    }

    #[test]
    fn ground_state_is_stationary_and_perturbation_breathes() {
        let p = PhysicalParams::newtonian(1e-14);
        let cfg = crate::groundstate::GroundStateConfig {
            nodes: 1500,
            r_max: Some(60.0),
            ..Default::default()
        };
        let (state, _) = crate::groundstate::solve_ground_state(&p, &cfg).unwrap();
        let run = EvolutionConfig::new(0.02, 1000).with_stride(10);
        let dev = stationarity_check(&state, &p, &run).unwrap();
        assert!(dev < 1e-3, "{dev}");
        let wide = RadialState::gaussian(state.grid, 1.3 * state.width()).unwrap();
        let breathing = stationarity_check(&wide, &p, &run).unwrap();
        assert!(breathing > 30.0 * 1e-3, "{breathing}");
    }

    #[test]
    fn deep_nonlocal_packet_spreads_freely() {
        let beta = 0.05;
        let s = gaussian(2000, 60.0, 1.0);
        // beta * sigma reaches 0.2 at sigma = 4, i.e. t = sqrt(15)
        let steps = 400;
        let cfg = EvolutionConfig::new(15f64.sqrt() / steps as f64, steps).with_stride(20);
        let k = GravityKernel::idg(beta);
        let on = evolve_with_kernel(&s, &k, &cfg).unwrap();
        let off = evolve_with_kernel(&s, &k, &cfg.free()).unwrap();
        for (a, b) in on.widths.iter().zip(&off.widths) {
            assert!(beta * a < 0.2 + 1e-9);
            assert!(((a - b) / b).abs() < 1e-2);
        }
    }

    #[test]
    fn halving_dt_is_second_order() {
        let s = gaussian(600, 30.0, 2.0);
        let k = GravityKernel::newtonian();
        let t_end = 8.0;
        let w = |steps: usize| {
            let cfg = EvolutionConfig::new(t_end / steps as f64, steps).with_stride(steps);
            *evolve_with_kernel(&s, &k, &cfg)
                .unwrap()
                .widths
                .last()
                .unwrap()
        };
        let (w1, w2, w4) = (w(100), w(200), w(400));
        let ratio = (w1 - w2) / (w2 - w4);
        assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
    }
}
