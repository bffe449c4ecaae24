//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of demands, allocations or weights do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numeric argument is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A point fails the membership predicate of its feasible set.
    #[error("infeasible point: {0}")]
    Infeasible(String),

    /// An iterative solver hit its iteration cap before reaching tolerance.
    #[error("solver did not converge: {0} (final gap {1:.3e})")]
    NonConvergence(String, f64),

    /// A trace file could not be parsed.
    #[error("trace parse error at line {line}: {msg}")]
    TraceParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 data, 3 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence(..) => 3,
            _ => 2,
        }
    }
}
