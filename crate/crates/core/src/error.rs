use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { what: &'static str, deviation: f64 },

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix exponential overflowed (scaled norm {0:.3e})")]
    ExpmOverflow(f64),

    #[error("linear solve failed: {0}")]
    Singular(&'static str),

    #[error("steady state is not unique (second-smallest singular value {0:.3e})")]
    DegenerateSteadyState(f64),

    #[error("no stationary state found (smallest singular value {0:.3e})")]
    NoSteadyState(f64),

    #[error("quadrature not converged: relative change {change:.3e} on refinement")]
    QuadratureNotConverged { change: f64 },

    #[error("activity came out negative ({0:.3e})")]
    NegativeActivity(f64),

    #[error("no-jump probability went negative ({0:.3e}); reduce dt")]
    NegativeNoJumpProbability(f64),

    #[error("time step too coarse: dt * rate = {0:.3e} exceeds 0.2")]
    TimeStepTooLarge(f64),

    #[error("state norm drifted by {0:.3e} in one step")]
    NormDrift(f64),

    #[error("operation not supported for this feedback scheme: {0}")]
    SchemeMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
