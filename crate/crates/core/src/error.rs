use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix must have positive dimension and {expected} entries, got {found}")]
    BadShape { expected: usize, found: usize },

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("trace is not 1 (got {trace})")]
    InvalidTrace { trace: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("operator is not unitary (deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid simplex point: {reason}")]
    InvalidSimplex { reason: &'static str },

    #[error("outcome {outcome} has probability {probability:e}, too small to condition on")]
    ZeroProbability { outcome: usize, probability: f64 },

    #[error("index {index} out of range for {len} outcomes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),

    #[error("Lindblad operators do not decohere the observable: {0}")]
    DecoherenceViolated(&'static str),

    #[error("integration is too stiff: trace drift persisted after step halving at t = {t}")]
    Stiffness { t: f64 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("no convergence before t = {t_cap}")]
    NonConvergence { t_cap: f64 },

    #[error("asymptotic state is {distance:e} away from the decohered state")]
    AsymptoticMismatch { distance: f64 },

    #[error("external state lies on a common boundary of subsimplices {0:?}")]
    AmbiguousDomain(alloc::vec::Vec<usize>),

    #[error("external weight of outcome {index} is zero; domain has no Lipschitz bound")]
    UnboundedDomain { index: usize },

    #[error("numerical failure: {0}")]
    Numerical(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
