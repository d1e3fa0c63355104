use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside its valid domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration file or table (aliases, taxonomy, pipeline config) is malformed.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data could not be parsed or does not satisfy a precondition.
    #[error("data error: {0}")]
    Data(String),

    /// A numerical fit could not produce a usable result.
    #[error("fit error: {0}")]
    Fit(String),

    /// An internal consistency check failed.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 usage/config, 3 data, 4 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 2,
            Error::Data(_)
            | Error::Fit(_)
            | Error::MissingInput(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => 3,
            Error::Invariant(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Fit(_) => "fit",
            Error::Invariant(_) => "invariant",
            Error::MissingInput(_) => "missing_input",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
