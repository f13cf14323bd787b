use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the quantum set: X^2 + Y^2 = {norm_sq} > 4")]
    QuantumSetViolation { x: f64, y: f64, norm_sq: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("argument out of domain: {0}")]
    DomainError(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("branch and bound exceeded its budget of {cap} cubes (frontier bound {upper_bound})")]
    BudgetExceeded { cap: u64, upper_bound: f64 },

    #[error("no sign change in bracket: {0}")]
    BracketFailure(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
