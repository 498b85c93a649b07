//! Crate-wide error type.
//!
//! Variants are grouped by failure class so the command-line driver can map
//! them onto stable process exit codes (see [`Error::exit_code`]).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid geometry, parameters, or configuration input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A basis or state would exceed the configured size budget.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Measurement-pattern text failed to parse; `byte` is the offset of the
    /// first offending byte in the pattern string.
    #[error("pattern parse error at byte {byte}: {message}")]
    PatternParse { byte: usize, message: String },

    /// A pattern is syntactically fine but inconsistent with the chain
    /// (period mismatch, forced adjacent excitations, clause conflicts).
    #[error("pattern rejected: {0}")]
    PatternInvalid(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("solver did not converge: {0}")]
    SolverNoConvergence(String),

    /// The ground state is (numerically) degenerate and a unique state
    /// cannot be returned.
    #[error("degenerate ground state: gap {gap:.3e} below resolution")]
    DegenerateGroundState { gap: f64 },

    /// Conditioning on a measurement outcome of zero Born probability.
    #[error("zero-probability outcome: {0}")]
    ZeroProbability(String),

    /// A fit could not be performed (too few points, sign changes, ...).
    #[error("fit failed: {0}")]
    FitFailure(String),

    /// Operation not defined for the given state backend or sector.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("checkpoint format error: {0}")]
    BadCheckpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line tools.
    ///
    /// 0 success, 2 configuration/input error, 3 solver non-convergence,
    /// 4 zero-probability conditioning, 5 fit failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverNoConvergence(_) | Error::DegenerateGroundState { .. } => 3,
            Error::ZeroProbability(_) => 4,
            Error::FitFailure(_) => 5,
            _ => 2,
        }
    }

    /// Short machine-readable tag for structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Capacity(_) => "capacity",
            Error::PatternParse { .. } => "pattern-parse",
            Error::PatternInvalid(_) => "pattern-invalid",
            Error::SolverNoConvergence(_) => "solver-no-convergence",
            Error::DegenerateGroundState { .. } => "degenerate-ground-state",
            Error::ZeroProbability(_) => "zero-probability",
            Error::FitFailure(_) => "fit-failure",
            Error::Unsupported(_) => "unsupported",
            Error::BadCheckpoint(_) => "bad-checkpoint",
            Error::Io(_) => "io",
        }
    }
}
