use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("not unitary: max defect {defect:e} exceeds tolerance {tol:e}")]
    NotUnitary { defect: f64, tol: f64 },

    #[error("malformed tuple file: {0}")]
    Parse(String),

    #[error("letter index {index} out of range for a tuple of length {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("size guard exceeded: {0}")]
    Guard(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            _ => 1,
        }
    }
}
