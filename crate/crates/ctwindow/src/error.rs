use std::path::PathBuf;

use ctwindow_core::Error as CoreError;

/// Broad failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Internal,
    Precondition,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Io => 3,
            ErrorKind::Internal => 4,
            ErrorKind::Precondition => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Validation => "validation",
            ErrorKind::Io => "io",
            ErrorKind::Internal => "internal",
            ErrorKind::Precondition => "precondition",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed CTV file: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: invalid spec: {message}")]
    Spec { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
    #[error("{0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Format { .. } => ErrorKind::Io,
            Error::Spec { .. } | Error::Usage(_) => ErrorKind::Validation,
            Error::Core { source, .. } => core_kind(source),
            Error::Internal(_) => ErrorKind::Internal,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let kind = self.kind();
        serde_json::json!({
            "error": {
                "kind": kind.as_str(),
                "exit_code": kind.exit_code(),
                "message": self.to_string(),
            }
        })
    }
}

fn core_kind(e: &CoreError) -> ErrorKind {
    match e {
        CoreError::InvalidWindow { .. }
        | CoreError::InvalidSpec(_)
        | CoreError::InvalidArgument(_)
        | CoreError::InvalidPhantom(_)
        | CoreError::InvalidShape(_)
        | CoreError::InvalidSpacing(_)
        | CoreError::DegenerateCalibration => ErrorKind::Validation,
        _ => ErrorKind::Precondition,
    }
}

/// Attaches a context string to core errors.
pub trait Context<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| Error::Core {
            context: context(),
            source,
        })
    }
}
