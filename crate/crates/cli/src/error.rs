use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{stage}: {source}")]
    Data {
        stage: &'static str,
        #[source]
        source: ctdne::Error,
    },

    #[error("writing {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{stage}: internal error: {message}")]
    Internal { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } | CliError::Output { .. } => 2,
            CliError::Internal { .. } => 3,
        }
    }

    pub fn output(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Output {
            path: path.into(),
            source,
        }
    }
}

/// Tags a library error with the pipeline stage it came from.
pub fn at(stage: &'static str) -> impl Fn(ctdne::Error) -> CliError {
    move |err| match err {
        ctdne::Error::InvalidConfig(msg) => CliError::Usage(format!("{stage}: {msg}")),
        ctdne::Error::DimensionMismatch { .. } | ctdne::Error::EmptyNeighborhood => CliError::Internal {
            stage,
            message: err.to_string(),
        },
        source => CliError::Data { stage, source },
    }
}

pub type CliResult<T> = Result<T, CliError>;
