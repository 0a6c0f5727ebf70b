use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("SVD failed to converge on a {rows}x{cols} matrix")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("eigen residual {residual:.3e} exceeds bound {bound:.3e}")]
    EigenResidual { residual: f64, bound: f64 },

    #[error("RBF nodes {first} and {second} coincide")]
    DuplicateNode { first: usize, second: usize },

    #[error("RBF affine block is rank deficient (rank {rank} < {required}): nodes are collinear")]
    CollinearNodes { rank: usize, required: usize },

    #[error("time {t} lies outside the model window [{start}, {end}]")]
    OutOfWindow { t: f64, start: f64, end: f64 },

    #[error("step {requested} s violates the CFL limit; use a step of at most {stable} s")]
    Cfl { requested: f64, stable: f64 },

    #[error("simulation produced non-finite fields; last valid snapshot index {last_valid}")]
    BlowUp { last_valid: usize },

    #[error("malformed container at byte offset {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Broad classification used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Cfl { .. } | Error::OutOfWindow { .. } => ErrorKind::Usage,
            Error::NonFinite { .. }
            | Error::Shape(_)
            | Error::DuplicateNode { .. }
            | Error::Format { .. }
            | Error::Io(_) => ErrorKind::Data,
            Error::SvdNoConvergence { .. }
            | Error::Eigen(_)
            | Error::EigenResidual { .. }
            | Error::CollinearNodes { .. }
            | Error::BlowUp { .. } => ErrorKind::Numerical,
        }
    }
}
