use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GtransError>;

#[derive(Debug, Error)]
pub enum GtransError {
    #[error("{path}:{line}: malformed input: {msg}")]
    MalformedInput {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("optimization diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("degenerate representation: row {row} has zero norm")]
    DegenerateRepresentation { row: usize },

    #[error("degenerate diagnostic: {0}")]
    DegenerateDiagnostic(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GtransError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GtransError::Io {
            path: path.into(),
            source,
        }
    }
}
