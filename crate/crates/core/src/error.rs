use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in input tensor at flat index {index}")]
    NumericInput { index: usize },

    #[error("spectrum is not conjugate symmetric (max deviation {deviation:e})")]
    Symmetry { deviation: f64 },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("singular system at frequency bin ({i}, {j}); use a positive ridge term")]
    Singular { i: usize, j: usize },

    #[error("solver diverged after {} iterations", trace.len())]
    Divergence { trace: Vec<f64> },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("inconsistent data: {0}")]
    Consistency(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn shape(expected: impl std::fmt::Display, actual: impl std::fmt::Display) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Input(_)
            | Error::Shape { .. }
            | Error::Geometry(_)
            | Error::Parse { .. }
            | Error::Consistency(_) => 2,
            Error::Io { .. } | Error::Decode { .. } | Error::Format(_) => 3,
            Error::Divergence { .. } => 4,
            Error::NumericInput { .. } | Error::Symmetry { .. } | Error::Singular { .. } => 1,
        }
    }
}
