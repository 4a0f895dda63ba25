//! Stationary states of the self-gravitating Schrodinger equation on a radial grid.
//!
//! The solver minimizes the discrete functional `F = T + W/2`, whose
//! stationarity condition is `(-(1/2) laplacian + Phi[psi]) psi = eps psi`.
//! Each step is a backward-Euler imaginary-time step with the potential
//! frozen at the current iterate, followed by renormalization:
//!
//! ```text
//! (1 + dt (H[u] - c)) v = u,   u <- v / |v|
//! ```
//!
//! with `c = min Phi` so the tridiagonal system stays positive definite for
//! any `dt`. Steps that raise `F` are rejected and `dt` is halved; accepted
//! steps grow `dt` by 10%.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::GravityKernel;
use crate::radial::{RadialGrid, SelfGravity};
use crate::units::{natural_scales, PhysicalParams};
use crate::variational::{minimize_spread, GaussianAnsatz};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialState {
    pub grid: RadialGrid,
    /// `u = r R(r)` on the interior nodes.
    pub u: Vec<f64>,
    pub norm: f64,
    pub chemical_potential: f64,
}

impl RadialState {
    /// Grid-normalized Gaussian of width `sigma`.
    pub fn gaussian(grid: RadialGrid, sigma: f64) -> Result<Self> {
        let g = GaussianAnsatz::new(sigma)?;
        let u = grid.radii().iter().map(|&r| r * g.amplitude(r)).collect();
        let mut s = Self {
            grid,
            u,
            norm: 0.0,
            chemical_potential: f64::NAN,
        };
        s.normalize()?;
        Ok(s)
    }

    pub fn density(&self) -> Vec<f64> {
        self.u.iter().map(|v| v * v).collect()
    }

    pub fn compute_norm(&self) -> f64 {
        self.grid.integrate_density(&self.density())
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.compute_norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Domain(format!(
                "cannot normalize state with norm {n}"
            )));
        }
        let s = n.sqrt().recip();
        self.u.iter_mut().for_each(|v| *v *= s);
        self.norm = self.compute_norm();
        Ok(())
    }

    /// `R(r_i) = u_i / r_i`
    pub fn radial_function(&self) -> Vec<f64> {
        self.u
            .iter()
            .enumerate()
            .map(|(i, v)| v / self.grid.r(i))
            .collect()
    }

    pub fn width(&self) -> f64 {
        self.grid.width(&self.density())
    }

    /// `|R|` beyond 90% of `r_max`, relative to the peak of `|R|`.
    pub fn tail_ratio(&self) -> f64 {
        let rf = self.radial_function();
        let peak = rf.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let start = (0.9 * self.grid.nodes as f64) as usize;
        let tail = rf[start..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        tail / peak
    }

    pub fn sign_changes(&self) -> usize {
        self.u
            .windows(2)
            .filter(|w| w[0].abs() > 1e-300 && w[1].abs() > 1e-300 && (w[0] > 0.0) != (w[1] > 0.0))
            .count()
    }
}

/// Discrete energy bookkeeping for one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energies {
    pub kinetic: f64,
    /// `<psi|Phi[psi]|psi>`, the full pair interaction.
    pub interaction: f64,
}

impl Energies {
    /// `T + W/2`, the functional whose Euler-Lagrange equation is the dynamics.
    pub fn functional(&self) -> f64 {
        self.kinetic + 0.5 * self.interaction
    }

    /// `T + W`, the Gaussian-ansatz energy convention.
    pub fn double_counted(&self) -> f64 {
        self.kinetic + self.interaction
    }
}

/// One-body problem on a fixed grid: kinetic operator plus self-gravity.
pub struct Hartree {
    pub grid: RadialGrid,
    pub gravity: SelfGravity,
}

impl Hartree {
    pub fn new(kernel: &GravityKernel, grid: RadialGrid) -> Result<Self> {
        Ok(Self {
            grid,
            gravity: SelfGravity::new(kernel, grid)?,
        })
    }

    pub fn potential(&self, u: &[f64]) -> Vec<f64> {
        let rho: Vec<f64> = u.iter().map(|v| v * v).collect();
        self.gravity.potential(&rho)
    }

    pub fn energies(&self, u: &[f64], phi: &[f64]) -> Energies {
        let w = self.grid.weight();
        Energies {
            kinetic: self.grid.kinetic_energy(u),
            interaction: w * u.iter().zip(phi).map(|(v, p)| p * v * v).sum::<f64>(),
        }
    }

    pub fn apply(&self, u: &[f64], phi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.grid.apply_kinetic(u, &mut out);
        for ((o, v), p) in out.iter_mut().zip(u).zip(phi) {
            *o += p * v;
        }
        out
    }

    /// `(eps, |H u - eps u|)` for a normalized `u` with its potential `phi`.
    pub fn residual(&self, u: &[f64], phi: &[f64]) -> (f64, f64) {
        let w = self.grid.weight();
        let hu = self.apply(u, phi);
        let eps = w * u.iter().zip(&hu).map(|(a, b)| a * b).sum::<f64>();
        let r2 = w * hu
            .iter()
            .zip(u)
            .map(|(a, b)| (a - eps * b).powi(2))
            .sum::<f64>();
        (eps, r2.sqrt())
    }

    /// Solve `(1 + dt (H - c)) v = u` with the Thomas algorithm.
    fn implicit_step(&self, u: &[f64], phi: &[f64], shift: f64, dt: f64) -> Vec<f64> {
        let n = u.len();
        let off = -dt * 0.5 / (self.grid.h * self.grid.h);
        let mut diag: Vec<f64> = phi
            .iter()
            .map(|p| 1.0 + dt * (p - shift) - 2.0 * off)
            .collect();
        let mut rhs = u.to_vec();
        for i in 1..n {
            let m = off / diag[i - 1];
            diag[i] -= m * off;
            rhs[i] -= m * rhs[i - 1];
        }
        rhs[n - 1] /= diag[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - off * rhs[i + 1]) / diag[i];
        }
        rhs
    }
}

/// Relative change in `F` treated as roundoff when the residual still drops.
pub const ROUNDOFF_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateConfig {
    pub nodes: usize,
    /// Fixed outer radius (natural units). When absent it is set to
    /// `r_max_factor` times the variational width and expanded as needed.
    pub r_max: Option<f64>,
    pub r_max_factor: f64,
    pub expansion_factor: f64,
    pub max_expansions: usize,
    /// Expansion stops here and the state is flagged weakly bound.
    pub r_max_cap: Option<f64>,
    /// Bound on `|H u - eps u| / T0`, with `T0` the kinetic energy of the start.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Imaginary-time steps in units of `1 / T0`.
    pub dt_initial: f64,
    pub dt_max: f64,
    pub decay_threshold: f64,
    pub min_cells_per_width: f64,
}

impl Default for GroundStateConfig {
    fn default() -> Self {
        Self {
            nodes: 2000,
            r_max: None,
            r_max_factor: 20.0,
            expansion_factor: 1.5,
            max_expansions: 4,
            r_max_cap: None,
            tolerance: 1e-10,
            max_iterations: 20_000,
            dt_initial: 1.0,
            dt_max: 1e4,
            decay_threshold: 1e-8,
            min_cells_per_width: 5.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    pub converged: bool,
    /// `|H u - eps u|` in natural units.
    pub residual: f64,
    /// The same, relative to the kinetic energy of the starting state.
    pub relative_residual: f64,
    pub energy_functional: f64,
    pub energy_paper_convention: f64,
    pub kinetic: f64,
    pub interaction: f64,
    pub chemical_potential: f64,
    pub width: f64,
    pub iterations: usize,
    pub rejected_steps: usize,
    pub r_max: f64,
    pub nodes: usize,
    pub tail_ratio: f64,
    /// Decay check failed at the largest permitted domain.
    pub weakly_bound: bool,
    /// `F` after each accepted step.
    pub functional_history: Vec<f64>,
    pub residual_history: Vec<f64>,
}

impl SolverReport {
    /// `W / (-4 T)`; equals one for an exact stationary state of a 1/r kernel.
    pub fn virial_ratio(&self) -> f64 {
        self.interaction / (-4.0 * self.kinetic)
    }
}

fn check_resolution(width: f64, grid: &RadialGrid, min_cells: f64) -> Result<()> {
    let cells = width / grid.h;
    if cells < min_cells {
        return Err(Error::Resolution {
            width_cells: cells,
            min_cells,
        });
    }
    Ok(())
}

/// Relax `initial` to the ground state on its own grid.
pub fn relax(
    kernel: &GravityKernel,
    initial: RadialState,
    cfg: &GroundStateConfig,
) -> Result<(RadialState, SolverReport)> {
    let grid = initial.grid;
    check_resolution(initial.width(), &grid, cfg.min_cells_per_width)?;
    let hartree = Hartree::new(kernel, grid)?;
    let mut u = initial.u;
    let mut phi = hartree.potential(&u);
    let mut energies = hartree.energies(&u, &phi);
    let mut f = energies.functional();
    let (mut eps, mut res) = hartree.residual(&u, &phi);
    // the kinetic energy of the start sets the scale of H
    let scale = energies.kinetic;
    let mut dt = cfg.dt_initial / scale;
    let dt_max = cfg.dt_max / scale;
    let mut f_hist = vec![f];
    let mut r_hist = vec![res];
    let mut rejected = 0;
    let mut iterations = 0;

    while res >= cfg.tolerance * scale && iterations < cfg.max_iterations {
        iterations += 1;
        let shift = phi.iter().cloned().fold(0.0_f64, f64::min);
        let mut v = hartree.implicit_step(&u, &phi, shift, dt);
        let n = grid.integrate_density(&v.iter().map(|x| x * x).collect::<Vec<_>>());
        let s = n.sqrt().recip();
        v.iter_mut().for_each(|x| *x *= s);
        let phi_v = hartree.potential(&v);
        let e_v = hartree.energies(&v, &phi_v);
        let f_v = e_v.functional();
        let (eps_v, res_v) = hartree.residual(&v, &phi_v);
        // near the minimum F is flat to roundoff; the residual decides there
        let descent = f_v <= f + 4.0 * f64::EPSILON * f.abs();
        let flat = f_v - f <= ROUNDOFF_BAND * f.abs() && res_v < res;
        if descent || flat {
            u = v;
            phi = phi_v;
            energies = e_v;
            f = f_v;
            (eps, res) = (eps_v, res_v);
            f_hist.push(f);
            r_hist.push(res);
            dt = (dt * 1.1).min(dt_max);
        } else {
            rejected += 1;
            dt *= 0.5;
            if dt * scale < 1e-14 {
                break;
            }
        }
    }

    let mut state = RadialState {
        grid,
        u,
        norm: 0.0,
        chemical_potential: eps,
    };
    state.norm = state.compute_norm();
    let converged = res < cfg.tolerance * scale;
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            residual: res,
            history: r_hist,
        });
    }
    let width = state.width();
    check_resolution(width, &grid, cfg.min_cells_per_width)?;
    let report = SolverReport {
        converged,
        residual: res,
        relative_residual: res / scale,
        energy_functional: energies.functional(),
        energy_paper_convention: energies.double_counted(),
        kinetic: energies.kinetic,
        interaction: energies.interaction,
        chemical_potential: eps,
        width,
        iterations,
        rejected_steps: rejected,
        r_max: grid.r_max(),
        nodes: grid.nodes,
        tail_ratio: state.tail_ratio(),
        weakly_bound: false,
        functional_history: f_hist,
        residual_history: r_hist,
    };
    Ok((state, report))
}

/// Ground state for a dimensionless kernel, starting from a Gaussian of width `sigma_guess`.
pub fn solve_with_kernel(
    kernel: &GravityKernel,
    sigma_guess: f64,
    cfg: &GroundStateConfig,
) -> Result<(RadialState, SolverReport)> {
    let mut r_max = cfg.r_max.unwrap_or(cfg.r_max_factor * sigma_guess);
    let h = r_max / (cfg.nodes + 1) as f64;
    let mut grid = RadialGrid::new(cfg.nodes, r_max)?;
    check_resolution(sigma_guess, &grid, cfg.min_cells_per_width)?;
    let mut guess = RadialState::gaussian(grid, sigma_guess)?;
    let mut expansions = 0;
    let mut total_iterations = 0;
    loop {
        let (state, mut report) = relax(kernel, guess, cfg)?;
        total_iterations += report.iterations;
        report.iterations = total_iterations;
        if report.tail_ratio < cfg.decay_threshold || cfg.r_max.is_some() {
            return Ok((state, report));
        }
        let next = r_max * cfg.expansion_factor;
        let capped = cfg.r_max_cap.is_some_and(|cap| next > cap);
        if expansions >= cfg.max_expansions || capped {
            report.weakly_bound = true;
            return Ok((state, report));
        }
        // keep the spacing, extend the domain, carry the converged profile over
        expansions += 1;
        r_max = next;
        let nodes = (r_max / h).round() as usize - 1;
        grid = RadialGrid { nodes, h };
        let mut u = state.u.clone();
        u.resize(nodes, 0.0);
        guess = RadialState {
            grid,
            u,
            norm: 0.0,
            chemical_potential: f64::NAN,
        };
        guess.normalize()?;
    }
}

/// Ground state for a physical instance, initialized at the variational width.
pub fn solve_ground_state(
    p: &PhysicalParams,
    cfg: &GroundStateConfig,
) -> Result<(RadialState, SolverReport)> {
    let scales = natural_scales(p)?;
    let kernel = GravityKernel::from_scales(p.model, &scales);
    let sigma = minimize_spread(p)?.sigma_natural;
    solve_with_kernel(&kernel, sigma, cfg)
}

/// Self-consistent potential of a normalized state.
pub fn self_consistent_potential(state: &RadialState, kernel: &GravityKernel) -> Result<Vec<f64>> {
    let norm = state.compute_norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!(
            "state is not normalized (norm = {norm})"
        )));
    }
    Ok(SelfGravity::new(kernel, state.grid)?.potential(&state.density()))
}

/// `Phi(0)` of a state: the kernel averaged over the density, `sum_j 4 pi h K(r_j) u_j^2`.
pub fn central_potential(state: &RadialState, kernel: &GravityKernel) -> Result<f64> {
    let w = state.grid.weight();
    let mut acc = 0.0;
    for (i, u) in state.u.iter().enumerate() {
        acc += kernel.eval(state.grid.r(i))? * u * u;
    }
    Ok(w * acc)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FunctionalGap {
    /// `F[best Gaussian] - F[solver state]`
    pub gap: f64,
    pub sigma_best: f64,
    pub f_gaussian: f64,
    pub f_solver: f64,
}

/// `F` of the grid-normalized Gaussian of width `sigma`.
pub fn gaussian_functional(hartree: &Hartree, sigma: f64) -> Result<f64> {
    let g = RadialState::gaussian(hartree.grid, sigma)?;
    let phi = hartree.potential(&g.u);
    Ok(hartree.energies(&g.u, &phi).functional())
}

/// Compare the solver state with the best Gaussian on the same discrete functional.
pub fn functional_gap(
    kernel: &GravityKernel,
    state: &RadialState,
    report: &SolverReport,
) -> Result<FunctionalGap> {
    let hartree = Hartree::new(kernel, state.grid)?;
    let f = |ln_s: f64| gaussian_functional(&hartree, ln_s.exp());
    // coarse log scan around the solver width, then golden-section refinement
    let center = report.width.ln();
    let pts: Vec<f64> = (0..=40)
        .map(|i| center - 1.5 + 3.0 * i as f64 / 40.0)
        .collect();
    let vals = pts.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let k = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
        .clamp(1, pts.len() - 2);
    let (mut a, mut b) = (pts[k - 1], pts[k + 1]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-9 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let ln_best = 0.5 * (a + b);
    let f_gaussian = f(ln_best)?;
    Ok(FunctionalGap {
        gap: f_gaussian - report.energy_functional,
        sigma_best: ln_best.exp(),
        f_gaussian,
        f_solver: report.energy_functional,
    })
}

/// Solve and compare against the best Gaussian.
pub fn gaussian_functional_gap(
    p: &PhysicalParams,
    cfg: &GroundStateConfig,
) -> Result<FunctionalGap> {
    let scales = natural_scales(p)?;
    let kernel = GravityKernel::from_scales(p.model, &scales);
    let (state, report) = solve_ground_state(p, cfg)?;
    functional_gap(&kernel, &state, &report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn newton_solution(nodes: usize) -> (RadialState, SolverReport) {
        let cfg = GroundStateConfig {
            nodes,
            ..Default::default()
        };
        solve_ground_state(&PhysicalParams::newtonian(1e-14), &cfg).unwrap()
    }

    #[test]
    fn newtonian_ground_state_converges() {
        let (state, report) = newton_solution(2000);
        assert!(report.converged && report.residual < 1e-8);
        assert!((state.norm - 1.0).abs() < 1e-10);
        assert_eq!(state.sign_changes(), 0);
        assert!(report.tail_ratio < 1e-8, "{}", report.tail_ratio);
        assert!(
            (report.virial_ratio() - 1.0).abs() < 1e-3,
            "{}",
            report.virial_ratio()
        );
        // eigenvalue and energies of the Newtonian soliton
        assert!(
            (report.chemical_potential + 0.163).abs() < 2e-3,
            "{}",
            report.chemical_potential
        );
    }

    #[test]
    fn accepted_steps_never_raise_the_functional() {
        let (_, report) = newton_solution(1000);
        for w in report.functional_history.windows(2) {
            assert!(w[1] <= w[0] + ROUNDOFF_BAND * w[0].abs());
        }
    }

    #[test]
    fn chemical_potential_is_consistent() {
        let (state, report) = newton_solution(1000);
        let h = Hartree::new(&GravityKernel::newtonian(), state.grid).unwrap();
        let phi = h.potential(&state.u);
        let (eps, _) = h.residual(&state.u, &phi);
        assert!((eps - report.chemical_potential).abs() < 1e-10);
    }

    #[test]
    fn gaussian_potential_at_origin_matches_radial_quadrature() {
        let beta = 0.8;
        let sigma = 1.7;
        let grid = RadialGrid::new(4000, 20.0 * sigma).unwrap();
        let k = GravityKernel::idg(beta);
        let g = RadialState::gaussian(grid, sigma).unwrap();
        let phi = self_consistent_potential(&g, &k).unwrap();
        // phi is even in r: phi(h) and phi(2h) eliminate the r^2 term
        let at0 = (4.0 * phi[0] - phi[1]) / 3.0;
        let want = crate::kernels::potential_at_origin(&k, sigma).unwrap();
        assert!(((at0 - want) / want).abs() < 1e-6, "{at0} {want}");
        let direct = central_potential(&g, &k).unwrap();
        assert!(((direct - want) / want).abs() < 1e-8, "{direct} {want}");
    }

    #[test]
    fn ground_state_beats_every_gaussian() {
        let cfg = GroundStateConfig {
            nodes: 1500,
            ..Default::default()
        };
        let gap = gaussian_functional_gap(&PhysicalParams::newtonian(1e-14), &cfg).unwrap();
        assert!(gap.gap > 0.0);
        // the Gaussian misses the soliton by about two percent
        assert!(
            (gap.gap / gap.f_solver.abs() - 0.02).abs() < 0.01,
            "{gap:?}"
        );
    }

    #[test]
    fn grid_halving_changes_energy_little() {
        let k = GravityKernel::newtonian();
        let e = |nodes| {
            let cfg = GroundStateConfig {
                nodes,
                r_max: Some(60.0),
                ..Default::default()
            };
            solve_with_kernel(&k, 2.0, &cfg)
                .unwrap()
                .1
                .energy_functional
        };
        let (coarse, fine) = (e(1200), e(2401));
        assert!(((coarse - fine) / fine).abs() < 1e-4, "{coarse} {fine}");
    }

    #[test]
    fn widths_order_by_model() {
        let cfg = GroundStateConfig {
            nodes: 1200,
            r_max: Some(80.0),
            ..Default::default()
        };
        let w = |k: GravityKernel| solve_with_kernel(&k, 2.0, &cfg).unwrap().1.width;
        let (n, i, y) = (
            w(GravityKernel::newtonian()),
            w(GravityKernel::idg(1.0)),
            w(GravityKernel::yukawa(1.0)),
        );
        assert!(i > n && n > y, "{i} {n} {y}");
    }

    #[test]
    fn unnormalized_state_is_rejected() {
        let grid = RadialGrid::new(100, 10.0).unwrap();
        let mut g = RadialState::gaussian(grid, 1.0).unwrap();
        g.u.iter_mut().for_each(|v| *v *= 2.0);
        assert!(self_consistent_potential(&g, &GravityKernel::newtonian()).is_err());
    }

    #[test]
    fn too_coarse_grid_is_a_resolution_error() {
        let cfg = GroundStateConfig {
            nodes: 20,
            r_max: Some(400.0),
            ..Default::default()
        };
        let err = solve_with_kernel(&GravityKernel::newtonian(), 1.88, &cfg).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
    }
}
