use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel is singular at r = 0 for the {model} model; regularize before evaluating")]
    SingularInput { model: &'static str },

    #[error("quadrature did not converge on [{lower}, {upper}]: estimate {estimate:e}, error {error:e} after {evaluations} evaluations")]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("no bracketed energy minimum over log10(s) in [{lo}, {hi}]; scanned {} points", profile.len())]
    NoMinimum {
        lo: f64,
        hi: f64,
        /// (log10 s, energy) pairs from the scan
        profile: Vec<(f64, f64)>,
    },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error(
        "resolution error: packet width spans {width_cells:.2} cells (need at least {min_cells})"
    )]
    Resolution { width_cells: f64, min_cells: f64 },

    #[error("stability violation at step {step}: norm drift {drift:e} in one step")]
    Stability { step: usize, drift: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether this error stems from invalid input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::SingularInput { .. }
                | Error::Resolution { .. }
                | Error::Config(_)
        )
    }
}
