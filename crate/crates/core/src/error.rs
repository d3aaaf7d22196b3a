use thiserror::Error;

/// Errors raised while validating inputs or evaluating the control machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not skew-Hermitian (deviation {0:.3e})")]
    NotSkewHermitian(f64),

    #[error("matrix is not traceless (|tr| = {0:.3e})")]
    NotTraceless(f64),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not special unitary (deviation {0:.3e})")]
    NotSpecialUnitary(f64),

    #[error("spectrum is not simple: eigenvalue gap {gap:.3e} below {tol:.1e}")]
    DegenerateSpectrum { gap: f64, tol: f64 },

    #[error("Hermitian eigensolver did not converge")]
    EigenFailure,

    #[error("control grids differ: expected {expected} samples on horizon {horizon}, found {found}")]
    GridMismatch {
        expected: usize,
        found: usize,
        horizon: f64,
    },

    #[error("invalid control signal: {0}")]
    InvalidControl(String),

    #[error("invalid horizon {0}: must be finite and positive")]
    InvalidHorizon(f64),

    #[error("vector is not tangent to the orbit (diagonal residual {0:.3e})")]
    NotTangent(f64),

    #[error("state is not a critical point of the orbit cost (|[rho, theta]| = {0:.3e})")]
    NotCritical(f64),

    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),

    #[error("cost became non-finite at iteration {0}")]
    NonFiniteCost(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
