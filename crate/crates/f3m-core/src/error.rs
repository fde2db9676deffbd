//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

/// Errors produced by kernel evaluation, partitioning, interpolation and the
/// solvers built on top of them.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied data violated a precondition (shape, finiteness, range).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A kernel specification with out-of-range parameters.
    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),

    /// Interpolation degree below the supported minimum.
    #[error("invalid degree: {0}")]
    InvalidDegree(String),

    /// A requested node grid exceeds the configured node cap.
    #[error("grid too large: {0}")]
    GridTooLarge(String),

    /// The dense oracle was asked for more pair evaluations than its cap allows.
    #[error("oracle too large: {0}")]
    OracleTooLarge(String),

    /// Far-field interpolation called on a box with zero edge.
    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    /// A point fell outside its enclosing cube beyond clamping.
    #[error("point outside cube: {0}")]
    OutOfCube(String),

    /// The error metric is undefined (reference vector has zero norm).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Conjugate gradient produced a non-finite iterate.
    #[error("solver breakdown: {0}")]
    SolverBreakdown(String),

    /// An internal accounting identity was violated; indicates a bug.
    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),

    /// A resource limit (threads, memory) could not be satisfied.
    #[error("resource error: {0}")]
    Resource(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed on-disk data.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Process exit code used by the CLI: 2 invalid input, 3 resource,
    /// 4 internal consistency.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::GridTooLarge(_) | Error::OracleTooLarge(_) | Error::Resource(_) => 3,
            Error::InternalConsistency(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
