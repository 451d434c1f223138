use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("window of {size} sites exceeds the solver guard of {limit}")]
    WindowTooLarge { size: usize, limit: usize },

    #[error("site set must be nonempty")]
    EmptySet,

    #[error("sets overlap in {0} sites")]
    Overlap(usize),

    #[error("set is not contained in the window: {0}")]
    NotContained(String),

    #[error("ill-conditioned system: residual {residual:.3e} exceeds {limit:.1e}")]
    IllConditioned { residual: f64, limit: f64 },

    #[error("truncation bound {achieved:.3e} cannot reach requested {requested:.3e} within radius {radius}")]
    Truncation {
        requested: f64,
        achieved: f64,
        radius: i64,
    },

    #[error("config error in key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
