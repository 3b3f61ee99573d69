use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training data contains a single class")]
    SingleClass,

    #[error(
        "ranking fit needs at least one mispredicted and one correct validation instance \
         (mispredicted: {mispredicted}, correct: {correct}); skip the refit and keep the previous risk model"
    )]
    DegenerateRanking { mispredicted: usize, correct: usize },

    #[error("numeric domain violation: {0}")]
    Domain(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
