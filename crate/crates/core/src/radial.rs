//! Uniform radial grid, discrete inner products and the self-gravity operator.
//!
//! States are stored as `u(r) = r R(r)` on the interior nodes `r_i = i h`,
//! `i = 1..=nodes`, with `u = 0` at `r = 0` and at `r_max = (nodes + 1) h`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::GravityKernel;
use crate::units::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub nodes: usize,
    pub h: f64,
}

impl RadialGrid {
    pub fn new(nodes: usize, r_max: f64) -> Result<Self> {
        if nodes < 8 || !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::Domain(format!(
                "grid needs >= 8 nodes and positive r_max, got {nodes} and {r_max}"
            )));
        }
        Ok(Self {
            nodes,
            h: r_max / (nodes + 1) as f64,
        })
    }

    pub fn r_max(&self) -> f64 {
        (self.nodes + 1) as f64 * self.h
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.r(i)).collect()
    }

    /// Volume weight `4 pi h` of the trapezoid rule in the `u` representation.
    #[inline]
    pub fn weight(&self) -> f64 {
        4.0 * PI * self.h
    }

    /// `int 4 pi r^2 |R|^2 dr` for a density `|u|^2` sampled on the nodes.
    pub fn integrate_density(&self, rho: &[f64]) -> f64 {
        self.weight() * rho.iter().sum::<f64>()
    }

    /// `<r^2>` for a (normalized) density `|u|^2`.
    pub fn second_moment(&self, rho: &[f64]) -> f64 {
        self.weight()
            * rho
                .iter()
                .enumerate()
                .map(|(i, d)| self.r(i).powi(2) * d)
                .sum::<f64>()
    }

    /// Width in the Gaussian parameterization: `sqrt(2/3 <r^2>)`.
    pub fn width(&self, rho: &[f64]) -> f64 {
        (2.0 / 3.0 * self.second_moment(rho) / self.integrate_density(rho)).sqrt()
    }

    /// Discrete kinetic energy `(1/2) int |grad psi|^2 = 2 pi h sum |u_{i+1} - u_i|^2 / h^2`.
    pub fn kinetic_energy<T: Copy + Into<Complex64>>(&self, u: &[T]) -> f64 {
        let mut acc = 0.0;
        let mut prev = Complex64::new(0.0, 0.0);
        for &v in u {
            let v: Complex64 = v.into();
            acc += (v - prev).norm_sqr();
            prev = v;
        }
        acc += prev.norm_sqr();
        2.0 * PI * acc / self.h
    }

    /// `(-1/2) d^2u/dr^2` with Dirichlet ends.
    pub fn apply_kinetic(&self, u: &[f64], out: &mut [f64]) {
        let c = 0.5 / (self.h * self.h);
        let n = u.len();
        for i in 0..n {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            out[i] = c * (2.0 * u[i] - left - right);
        }
    }
}

/// Maps a density `|u|^2` on the grid to the self-consistent potential
/// `Phi(r_i) = int K(|x - x'|) |psi(x')|^2 d^3x'`.
///
/// The angular integrals are done exactly with the kernel's shell average,
/// leaving a single radial sum.
#[derive(Debug, Clone)]
pub enum SelfGravity {
    /// Gravity switched off.
    Free,
    /// `-1/max(r, r')` shell average, evaluated with prefix sums.
    Newtonian { grid: RadialGrid, strength: f64 },
    /// General kernel: row-major `nodes x nodes` matrix of weighted shell averages.
    Dense { grid: RadialGrid, matrix: Vec<f64> },
}

impl SelfGravity {
    pub fn new(kernel: &GravityKernel, grid: RadialGrid) -> Result<Self> {
        kernel.validate()?;
        if kernel.strength == 0.0 {
            return Ok(SelfGravity::Free);
        }
        if kernel.model == Model::Newtonian {
            return Ok(SelfGravity::Newtonian {
                grid,
                strength: kernel.strength,
            });
        }
        Ok(Self::dense(kernel, grid))
    }

    /// Dense operator regardless of model.
    pub fn dense(kernel: &GravityKernel, grid: RadialGrid) -> Self {
        let n = grid.nodes;
        let w = grid.weight();
        let mut matrix = vec![0.0; n * n];
        matrix.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let ri = grid.r(i);
            for (j, m) in row.iter_mut().enumerate() {
                *m = w * kernel.shell_average(ri, grid.r(j));
            }
        });
        SelfGravity::Dense { grid, matrix }
    }

    pub fn potential(&self, rho: &[f64]) -> Vec<f64> {
        match self {
            SelfGravity::Free => vec![0.0; rho.len()],
            SelfGravity::Newtonian { grid, strength } => {
                let n = rho.len();
                let mut out = vec![0.0; n];
                // inner[i] = sum_{j <= i} rho_j, outer[i] = sum_{j > i} rho_j / r_j
                let mut inner = 0.0;
                for (i, o) in out.iter_mut().enumerate() {
                    inner += rho[i];
                    *o = inner / grid.r(i);
                }
                let mut outer = 0.0;
                for i in (0..n).rev() {
                    out[i] += outer;
                    outer += rho[i] / grid.r(i);
                }
                let c = -strength * grid.weight();
                out.iter_mut().for_each(|v| *v *= c);
                out
            }
            SelfGravity::Dense { grid, matrix } => {
                let n = grid.nodes;
                matrix
                    .par_chunks(n)
                    .map(|row| row.iter().zip(rho).map(|(m, d)| m * d).sum())
                    .collect()
            }
        }
    }
}
