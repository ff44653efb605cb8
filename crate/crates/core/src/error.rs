use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the resampling toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("point cloud has no points")]
    EmptyCloud,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("coordinate matrix is zero; cannot normalize")]
    DegenerateCloud,
    #[error("{0} did not converge within {1} iterations")]
    ConvergenceFailure(&'static str, usize),
    #[error("rotation is not orthonormal with determinant +1 (deviation {0:.3e})")]
    InvalidRotation(f64),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("node {0} has no neighbors")]
    IsolatedNode(usize),
    #[error("bandwidth {bandwidth} exceeds node count {n}")]
    BandwidthTooLarge { bandwidth: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("operation requires a {required} shift operator, got {actual}")]
    WrongShiftKind {
        required: &'static str,
        actual: &'static str,
    },
    #[error("Vandermonde system is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("point {index} has {found} neighbors within radius {radius}, need at least 3")]
    InsufficientNeighbors { index: usize, found: usize, radius: f64 },
    #[error("all feature rows are zero")]
    AllZeroFeatures,
    #[error("distribution has no support")]
    ZeroSupport,
    #[error("point {0} has a nonzero feature but zero sampling probability")]
    UnsupportedFeature(usize),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn bad_params(msg: impl Into<String>) -> Error {
    Error::BadParams(msg.into())
}

/// Attaches the offending path to an I/O error.
pub(crate) fn file_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}
