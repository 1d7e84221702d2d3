//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NlvcError {
    /// Precondition violations: bad spacing, degenerate boxes, rank
    /// mismatches, invalid kernel parameters, malformed field files.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Data that is structurally fine but inconsistent with the requested
    /// solve: Neumann compatibility defects, right-hand sides with a
    /// null-space component, missing boundary data.
    #[error("incompatible data: {0}")]
    Incompatible(String),

    /// Numerical breakdown: indefinite operator in CG, non-convergence
    /// promoted to an error by a caller.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, NlvcError>;
