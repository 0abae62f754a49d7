use std::path::{Path, PathBuf};

/// Everything the driver can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or inconsistent config document.
    #[error("{0}")]
    Config(String),
    /// Config problem located in a file.
    #[error("{path}: {message}")]
    ConfigFile {
        /// Offending file.
        path: PathBuf,
        /// What went wrong.
        message: String,
    },
    /// File system failure.
    #[error("{path}: {source}")]
    Io {
        /// File involved.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// Export file that does not follow the bundle layout.
    #[error("{path}: {message}")]
    Format {
        /// Offending file.
        path: PathBuf,
        /// What went wrong.
        message: String,
    },
    /// Finite-difference check above tolerance.
    #[error("{family} max relative error {error:e} exceeds {tol:e}")]
    GradientMismatch {
        /// Variable family label.
        family: &'static str,
        /// Observed error.
        error: f64,
        /// Allowed error.
        tol: f64,
    },
    /// Failure inside the engine.
    #[error(transparent)]
    Core(#[from] rcto_core::Error),
}

/// Result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub(crate) fn at(self, path: &Path) -> Self {
        match self {
            Error::Config(message) => Error::ConfigFile {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        }
    }

    /// Stable kebab-case identifier.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::ConfigFile { .. } => "config",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::GradientMismatch { .. } => "gradient-mismatch",
            Error::Core(e) => e.kind(),
        }
    }

    /// `error[kind]: message` on a single line.
    pub fn one_line(&self) -> String {
        let msg = self.to_string();
        let flat: Vec<&str> = msg.split_whitespace().collect();
        format!("error[{}]: {}", self.kind(), flat.join(" "))
    }
}
