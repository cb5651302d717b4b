//! Error type shared by all modules, with the CLI exit-code mapping.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum McError {
    /// Malformed configuration input (bad JSON, unknown key, unparseable value).
    #[error("config error: {0}")]
    Config(String),
    /// A parameter set or argument violates a model invariant.
    #[error("validation error: {0}")]
    Validation(String),
    /// An LED toggle cannot be placed on the integrator grid.
    #[error("grid alignment error: {0}")]
    GridAlignment(String),
    /// A root bracket has no sign change (inconsistent parameters).
    #[error("bracket error: {0}")]
    Bracket(String),
    /// chin_threshold is defined only for Hill coefficients n >= 2.
    #[error("unsupported Hill order n = {0}: the third derivative has no positive root of the required type for n < 2")]
    UnsupportedOrder(u32),
    /// A trajectory never crosses the requested threshold within the time cap.
    #[error("non-reaching error: {0}")]
    NonReaching(String),
    /// Loading/deloading durations do not fit into the bit interval.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// An iterative solver exceeded its iteration cap.
    #[error("no convergence: {0}")]
    NonConvergence(String),
    /// An operation requires nonempty input.
    #[error("empty input: {0}")]
    EmptyInput(String),
    /// A sample time lies outside the available data range.
    #[error("range error: {0}")]
    Range(String),
    /// Input data violates a structural invariant (e.g. non-monotone counts).
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, McError>;

impl McError {
    /// CLI exit code: 2 for validation-class errors, 3 for infeasibility,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            McError::Config(_)
            | McError::Validation(_)
            | McError::GridAlignment(_)
            | McError::Bracket(_)
            | McError::UnsupportedOrder(_)
            | McError::NonReaching(_)
            | McError::EmptyInput(_)
            | McError::Range(_) => 2,
            McError::Infeasible(_) => 3,
            _ => 1,
        }
    }
}
