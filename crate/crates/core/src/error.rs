use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature hit its subdivision cap before reaching tolerance.
    #[error("quadrature did not converge: achieved error estimate {achieved:.3e} (requested {requested:.3e})")]
    Quadrature { achieved: f64, requested: f64 },

    /// A grid would exceed the configured point cap.
    #[error("grid of {requested} points exceeds the cap of {cap}")]
    GridTooLarge { requested: usize, cap: usize },

    /// Leave-one-out density is non-positive at some observations.
    #[error("leave-one-out density is non-positive at {} observation(s) (first: {:?})", .indices.len(), .indices.first())]
    IsolatedPoints { indices: Vec<usize> },

    /// Malformed model or kernel description.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable category, used by the CLI's `ERROR:<kind>:` prefix.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Quadrature { .. } => "numeric",
            Error::GridTooLarge { .. } => "size",
            Error::IsolatedPoints { .. } => "isolated",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    /// Whether the failure is numerical rather than a problem with the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::IsolatedPoints { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
