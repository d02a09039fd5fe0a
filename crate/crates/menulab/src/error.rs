use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An integrand or objective produced a non-finite value.
    #[error("non-finite sample at {context}: f({x}) = {value}")]
    NonFiniteSample {
        context: &'static str,
        x: f64,
        value: f64,
    },

    /// A point fell outside the domain it was evaluated on.
    #[error("{what}: {value} outside [{lo}, {hi}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A construction violated a documented invariant.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// A precondition of an operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A mechanism failed IC/IR/consistency validation.
    #[error("mechanism validation failed: {0}")]
    Validation(String),

    /// The LP solver could not produce an optimal solution.
    #[error("solver: {0}")]
    Solver(String),

    /// Quadrature refinement did not converge.
    #[error("quadrature did not converge: last estimates {previous} and {latest}")]
    NoConvergence { previous: f64, latest: f64 },

    /// Scenario configuration could not be parsed.
    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
