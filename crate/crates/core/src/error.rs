use thiserror::Error;

/// Errors raised by domain construction, assembly, eigensolvers and verification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("voxelization produced no nodes inside the domain")]
    EmptyDomain,

    #[error("domain has no interior nodes (every node touches the boundary layer)")]
    EmptyInterior,

    #[error("S*S is not block scalar: deviation {deviation:e}")]
    NonScalarProduct { deviation: f64 },

    #[error("operator is not Hermitian: max |A - A*| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("operator of size {n} exceeds the dense cap {cap}")]
    TooLargeForDense { n: usize, cap: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("shift {shift} collides with an eigenvalue; perturb the shift")]
    ShiftSingular { shift: f64 },

    #[error("Gram eigenvalue {value:e} is negative beyond tolerance")]
    NegativeGramEigenvalue { value: f64 },

    #[error("eigenvector lift degenerates (lambda + m^2 = 0 or zero lifted norm)")]
    ZeroLift,

    #[error("field has zero norm on the domain")]
    ZeroNorm,

    #[error("domain is bounded: truncated measure stabilizes from n = {stable_from}")]
    BoundedDomain { stable_from: usize },

    #[error("eigenvalue windows are inconsistent: {0}")]
    WindowMismatch(String),

    #[error("verification incomplete: {0}")]
    IncompleteVerification(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
