use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The coordinate form or map degenerates at the boundary `ρ = 0`.
    #[error("singular at rho = {rho:e}")]
    Singular { rho: f64 },

    #[error("step size fell below {min_step:e} at s = {s} without meeting tolerance")]
    StepFailure { s: f64, min_step: f64 },

    #[error("relative energy drift {drift:e} exceeds bound {bound:e}")]
    EnergyDrift { drift: f64, bound: f64 },

    #[error("quadrature did not converge: estimated error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("expansion fit ill-conditioned: condition number {condition:e} above {threshold:e}; widen or shift the eps grid")]
    IllConditioned { condition: f64, threshold: f64 },

    #[error("metric fingerprint mismatch: {expected} vs {got}")]
    FingerprintMismatch { expected: String, got: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
