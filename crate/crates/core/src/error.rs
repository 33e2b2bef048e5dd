use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("empty series: {0}")]
    EmptySeries(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("missing landmark: {0}")]
    MissingLandmark(&'static str),

    #[error("degenerate geometry: segment length {length} <= tolerance {tolerance}")]
    DegenerateGeometry { length: f64, tolerance: f64 },

    #[error("right-angle construction violated: ratio {ratio} exceeds 1 + {tolerance}")]
    ConstructionViolated { ratio: f64, tolerance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams(_) | Error::InvalidSpec(_) => 1,
            Error::EmptySeries(_) | Error::InsufficientData { .. } => 3,
            _ => 2,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::Io {
                path: PathBuf::new(),
                source: e,
            },
            other => Error::Data(format!("{other:?}")),
        }
    }
}
