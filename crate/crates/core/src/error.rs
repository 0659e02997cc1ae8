use thiserror::Error;

/// Errors shared by every layer of the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("value is not p-integral")]
    NotIntegral,
    #[error("ends cannot be separated at the stored precision")]
    IndistinguishableEnds,
    #[error("hull shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("order is not contained in the Eichler order")]
    NotContained,
    #[error("parameters outside the domain: {0}")]
    DomainViolation(String),
    #[error("unsupported order kind: {0}")]
    UnsupportedKind(String),
    #[error("oracle counts did not stabilize: {0}")]
    NotStabilized(String),
    #[error("orbit budget exceeded ({0} points)")]
    OrbitBudgetExceeded(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DivisionByZero => "division_by_zero",
            Error::PrecisionExhausted(_) => "precision_exhausted",
            Error::NotIntegral => "not_integral",
            Error::IndistinguishableEnds => "indistinguishable_ends",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::NotContained => "not_contained",
            Error::DomainViolation(_) => "domain_violation",
            Error::UnsupportedKind(_) => "unsupported_kind",
            Error::NotStabilized(_) => "not_stabilized",
            Error::OrbitBudgetExceeded(_) => "orbit_budget_exceeded",
            Error::InvalidInput(_) => "invalid_input",
        }
    }
}
