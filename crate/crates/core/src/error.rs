use thiserror::Error;

/// Errors raised by the pricing, root-finding and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// One or more parameter constraints are violated. Every violation is listed.
    #[error("invalid parameters: {}", .0.join("; "))]
    Domain(Vec<String>),

    /// The free-boundary residual showed no sign change on the search grid.
    #[error("no bracketing interval for the conversion boundary: {0}")]
    Bracket(String),

    /// A smooth-pasting or verification inequality failed.
    #[error("smooth-pasting violation: {0}")]
    PastingViolation(String),

    /// Policy iteration did not stabilise.
    #[error("no convergence after {iterations} iterations (last update {last_residual:e})")]
    NoConvergence {
        iterations: usize,
        last_residual: f64,
    },

    /// Two objects that must share parameters were built from different ones.
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),

    /// A lattice or simulation configuration is unusable.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A simulation request cannot be seeded (for instance zero paths).
    #[error("invalid simulation request: {0}")]
    Seed(String),

    /// Reproduced table cells fall outside the tolerance.
    #[error("{} table cell(s) outside tolerance: {}", .0.len(), .0.join(", "))]
    Mismatch(Vec<String>),
}

impl Error {
    /// Numerical failures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Bracket(_) | Error::NoConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
