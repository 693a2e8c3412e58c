//! Error taxonomy shared across the workspace.
//!
//! The variants map onto process exit codes in the CLI: parameter and
//! planning problems are caller mistakes, numeric errors are failures of
//! quadrature/sampling machinery, and internal errors signal that a
//! mathematical guard (a sandwich bound, a bracket, a measure lower bound)
//! was violated, i.e. a bug.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument supplied by the caller (dimension mismatch, odd M, ...).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Requested configuration cannot be planned (constraint unsatisfiable,
    /// enumeration budget overflow, ...).
    #[error("planning error: {0}")]
    Planning(String),

    /// Quadrature non-convergence, rejection-loop overrun, non-finite values.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A computed quantity fell outside an analytic guard; indicates a bug
    /// or a grossly under-resolved grid.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed descriptor, config or table file.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    /// 0 = success, 2 = check failure, 3 = parameter/planning, 4 = numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Planning(_) | Error::Parse(_) => 3,
            Error::Numeric(_) | Error::Internal(_) | Error::Io(_) => 4,
        }
    }
}
