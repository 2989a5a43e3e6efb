use std::io;
use std::path::PathBuf;

use nero_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },
    #[error("{}: {what} mismatch, expected {expected}, found {found}", path.display())]
    DimensionMismatch {
        path: PathBuf,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{}:{line}:{column}: non-finite value", path.display())]
    NonFiniteValue { path: PathBuf, line: u64, column: usize },
    #[error("{}:{line}: label {label} outside {{-1}} and 0..{classes}", path.display())]
    LabelOutOfRange {
        path: PathBuf,
        line: u64,
        label: i64,
        classes: usize,
    },
    #[error("{}: invalid JSON: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("model was fit on different final-layer parameters (hash {expected}, bundle has {found})")]
    ModelMismatch { expected: String, found: String },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        let path = path.into();
        if source.kind() == io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for this error: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => EXIT_USAGE,
            Error::Core(e) => match e.root() {
                CoreError::InvalidParameter { .. } => EXIT_USAGE,
                CoreError::AllClassesDegenerate
                | CoreError::DegenerateInput(_)
                | CoreError::SingularCovariance
                | CoreError::DivergedLoss { .. } => EXIT_NUMERIC,
                _ => EXIT_DATA,
            },
            _ => EXIT_DATA,
        }
    }
}
