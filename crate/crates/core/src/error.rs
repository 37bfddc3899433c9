use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lanczos bidiagonalization did not converge after {iterations} restarts (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("requested {requested} dimensions but the residual operator has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("unknown entity: {0}")]
    UnknownEntity(String),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("entity sets differ: {0}")]
    EntityMismatch(String),

    #[error("missing column {0}")]
    MissingColumn(String),

    #[error("malformed embedding cache: {0}")]
    Cache(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
