use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {error}", path.display())]
    Io { path: PathBuf, error: std::io::Error },

    #[error("{}: malformed JSON at byte {offset}: {message}", path.display())]
    Json {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}: {error}", path.display())]
    Core {
        path: PathBuf,
        error: uisum_core::Error,
    },

    #[error(transparent)]
    Model(#[from] uisum_core::Error),
}

impl Error {
    pub fn io(path: &Path, error: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            error,
        }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn core(path: &Path, error: uisum_core::Error) -> Self {
        Error::Core {
            path: path.to_path_buf(),
            error,
        }
    }

    /// The underlying core error, if any.
    pub fn as_core(&self) -> Option<&uisum_core::Error> {
        match self {
            Error::Core { error, .. } | Error::Model(error) => Some(error),
            _ => None,
        }
    }

    /// True for faults caused by non-finite values during computation.
    pub fn is_numeric(&self) -> bool {
        matches!(self.as_core(), Some(uisum_core::Error::Numeric(_)))
    }
}
