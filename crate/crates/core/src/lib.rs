//! Ground-state spreads and dynamics of a self-gravitating quantum packet
//! under Newtonian, nonlocal (erf-regularized) and Yukawa-corrected gravity.

pub mod cli;
pub mod error;
pub mod evolution;
pub mod groundstate;
pub mod io;
pub mod kernels;
pub mod quadrature;
pub mod radial;
pub mod special;
pub mod units;
pub mod variational;

pub use error::{Error, Result};
pub use kernels::GravityKernel;
pub use units::{Model, NaturalScales, PhysicalParams};
pub use variational::{GaussianAnsatz, SpreadResult};
