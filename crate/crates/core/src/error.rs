use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("unknown operator tag `{0}` (expected one of q, p, q2, p2, q4, a, adag, id)")]
    UnknownOperator(String),

    #[error("basis size {dim} too small for `{op}` (needs at least {min})")]
    DimTooSmall { op: String, dim: usize, min: usize },

    #[error("only {achieved} of {wanted} levels converged")]
    NotConverged { wanted: usize, achieved: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("need {needed} trusted levels, spectrum has {available}")]
    InsufficientLevels { needed: usize, available: usize },

    #[error("angle undefined at the phase-space origin")]
    DegenerateAngle,

    #[error("truncation mass {mass:.3e} exceeds 1e-12; use a basis of at least {min_dim}")]
    Truncation { mass: f64, min_dim: usize },

    #[error("dimension mismatch: need at least {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("quadrature under-resolved: halving the nodes changes the result by {deviation:.3e}")]
    UnderResolved { deviation: f64 },

    #[error("radial tail {tail:.3e} beyond the quadrature range exceeds tolerance {tol:.1e}")]
    TailBound { tail: f64, tol: f64 },

    #[error("{value} outside the valid range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("non-monotone data: {0}")]
    NonMonotone(String),

    #[error("period round-trip residual {residual:.3e} at H = {worst_h} exceeds {tol:.1e}")]
    RoundTrip { worst_h: f64, residual: f64, tol: f64 },

    #[error("position {q} is classically forbidden at energy {energy}")]
    Forbidden { q: f64, energy: f64 },
}

impl Error {
    /// True for errors caused by bad caller input rather than a failed
    /// numerical check.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::UnknownOperator(_)
                | Error::DimTooSmall { .. }
                | Error::DimensionMismatch { .. }
                | Error::DegenerateGrid(_)
                | Error::DegenerateAngle
                | Error::OutOfRange { .. }
                | Error::Forbidden { .. }
                | Error::Truncation { .. }
                | Error::InsufficientLevels { .. }
        )
    }
}
