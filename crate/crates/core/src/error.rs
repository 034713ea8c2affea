use std::fmt;

/// Errors produced by constructors, solvers, and the experiment harness.
#[derive(Debug)]
pub enum Error {
    /// A dimension or length did not match what the operation requires.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// A parameter is outside its documented range.
    InvalidParameter {
        name: &'static str,
        message: String,
    },
    /// A sign vector entry was not exactly +1 or -1.
    InvalidSign { index: usize, value: f64 },
    /// A sensing matrix column is identically zero.
    ZeroColumn { index: usize },
    /// A dual iterate violates its feasibility box or cache coherence.
    InfeasibleDualState(String),
    /// The experiment configuration is inconsistent (empty grid, too many
    /// swept axes, unknown preset, ...).
    InvalidConfig(String),
    /// A problem file could not be parsed.
    Parse { line: usize, message: String },
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                context,
                expected,
                got,
            } => write!(f, "{context}: expected length {expected}, got {got}"),
            Error::InvalidParameter { name, message } => {
                write!(f, "invalid parameter `{name}`: {message}")
            }
            Error::InvalidSign { index, value } => {
                write!(f, "sign vector entry {index} is {value}, must be +1 or -1")
            }
            Error::ZeroColumn { index } => {
                write!(f, "sensing matrix column {index} is identically zero")
            }
            Error::InfeasibleDualState(msg) => write!(f, "infeasible dual state: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid experiment config: {msg}"),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
