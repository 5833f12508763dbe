use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported wavelet family: {0}")]
    UnsupportedFamily(String),

    #[error("refinement depth {0} outside the supported range [8, 20]")]
    DepthOutOfRange(u32),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The Gaussian mechanism needs a strictly positive slack when the budget is finite.
    #[error("server {server}: delta must be in (0, 1) when epsilon is finite (got {delta})")]
    ZeroDelta { server: usize, delta: f64 },

    #[error("empty dataset for server {0}")]
    EmptyDataset(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("aggregation weights are degenerate at level {level}: all unnormalised weights are zero")]
    DegenerateWeights { level: u32 },

    #[error("transcripts disagree on the level range: {0}")]
    MismatchedLevels(String),

    /// Local design matrix is (numerically) singular: the (LP1) eigenvalue condition fails.
    #[error("(LP1) violated at x = {x}: smallest eigenvalue {lambda_min:.3e} of the local design matrix is below {threshold:.1e}")]
    LocalDesignSingular {
        x: f64,
        lambda_min: f64,
        threshold: f64,
    },

    #[error("design mismatch: {0}")]
    DesignMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
