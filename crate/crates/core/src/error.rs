use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("SVD of a {rows}x{cols} matrix did not converge within {max_iter} iterations")]
    SvdNonConvergence {
        rows: usize,
        cols: usize,
        max_iter: usize,
    },

    #[error("eigendecomposition of a {dim}x{dim} matrix did not converge within {max_iter} iterations")]
    EigenNonConvergence { dim: usize, max_iter: usize },

    #[error("{stage} diverged at iteration {iteration}: {detail}")]
    Divergence {
        stage: &'static str,
        iteration: usize,
        detail: String,
    },

    #[error("rank deficient: singular value {index} is {sigma:e}, below 1e-12 * {sigma_max:e}")]
    RankDeficient {
        index: usize,
        sigma: f64,
        sigma_max: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{}: format error at byte {offset}: {message}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 I/O, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::InvalidConfig(_) | Error::Shape(_) => 1,
            Error::Format { .. } | Error::Io { .. } => 2,
            Error::SvdNonConvergence { .. }
            | Error::EigenNonConvergence { .. }
            | Error::Divergence { .. }
            | Error::RankDeficient { .. }
            | Error::Degenerate(_) => 3,
        }
    }
}
