use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("training aborted: {0}")]
    NonFinite(String),

    #[error("generation {generation}: {source}")]
    Generation {
        generation: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (paths, files, config, names)
    /// rather than by a runtime failure.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Parse(_) | Error::Validation(_) | Error::Config(_) | Error::UnknownName { .. } => true,
            Error::Generation { source, .. } => source.is_user_error(),
            _ => false,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
