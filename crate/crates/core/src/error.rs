use thiserror::Error;

/// Errors raised by the computational modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpiError {
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("precision mismatch: {left} vs {right} digits")]
    PrecisionMismatch { left: u32, right: u32 },

    #[error("divergence is infinite: support point {0} has mass under P but not under Q")]
    InfiniteDivergence(i64),

    #[error("series truncated after {terms} terms with tail bound {tail_bound}")]
    SeriesTruncated { terms: usize, tail_bound: String },

    #[error("computation budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("internal consistency failure: {0}")]
    Consistency(String),
}

pub type Result<T, E = EpiError> = std::result::Result<T, E>;
