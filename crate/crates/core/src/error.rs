use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The Cauchy prox weight exceeds `8 * gamma^2`, so the prox objective is
    /// no longer convex.
    #[error("convergence condition violated: lambda = {lambda} > 8 * gamma^2 = {bound} (gamma = {gamma})")]
    ConvergenceCondition { lambda: f64, gamma: f64, bound: f64 },

    #[error("numeric divergence after {} inner iterations (last finite cost {:?})", trace.len(), trace.last())]
    NumericDivergence { trace: Vec<f64> },

    #[error("filter {k} collapsed to the zero vector before normalization")]
    FilterDegenerate { k: usize },

    #[error("{}: parse error at byte {offset}: {message}", path.display())]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("{}: unsupported image: {message}", path.display())]
    UnsupportedFormat { path: PathBuf, message: String },

    #[error("incompatible checkpoint format version {found} (this build reads {expected})")]
    IncompatibleVersion { found: u32, expected: u32 },

    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
