use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("territory {0} has no built-in rules; load a rule file instead")]
    NoBuiltinRules(String),

    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    #[error("undefined assortativity: all edge endpoints carry the same label")]
    UndefinedAssortativity,

    #[error("sample too small: {0}")]
    SampleTooSmall(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("width mismatch: expected {expected} columns, found {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("empty vocabulary: {0}")]
    EmptyVocabulary(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("unknown format: {0}")]
    UnknownFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// True for errors caused by the caller's input rather than by the
    /// environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
