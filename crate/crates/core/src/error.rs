use std::fmt;
use std::path::PathBuf;

use crate::linalg::LinalgError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug)]
pub enum Error {
    /// A precondition on shapes, ranges or call order was violated.
    Contract(String),
    /// An argument is outside the mathematical domain of the operation.
    Domain(String),
    /// A non-finite value appeared during a forward, backward or update pass.
    NumericOverflow {
        t: usize,
        context: &'static str,
    },
    Linalg(LinalgError),
    /// Malformed input data; `line` is 1-based.
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Config(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Self::Contract(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category name, also used to pick the CLI exit code.
    pub fn category(&self) -> &'static str {
        match self {
            Self::Contract(_) | Self::Domain(_) | Self::Config(_) => "config",
            Self::NumericOverflow { .. } | Self::Linalg(_) => "numeric",
            Self::Parse { .. } | Self::Io { .. } => "io",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Contract(msg) => write!(f, "contract violation: {msg}"),
            Self::Domain(msg) => write!(f, "domain error: {msg}"),
            Self::NumericOverflow { t, context } => {
                write!(f, "non-finite value in {context} at timestep {t}")
            }
            Self::Linalg(e) => write!(f, "{e}"),
            Self::Parse {
                path,
                line,
                message,
            } => {
                write!(f, "{}:{line}: {message}", path.display())
            }
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Self::Config(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Linalg(e) => Some(e),
            Self::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<LinalgError> for Error {
    fn from(e: LinalgError) -> Self {
        Self::Linalg(e)
    }
}
