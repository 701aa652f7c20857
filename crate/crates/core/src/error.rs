use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("invalid {field}: {reason}")]
    InvalidValue { field: &'static str, reason: String },

    #[error("non-finite {what}{}", tick_suffix(*tick))]
    NonFinite { what: &'static str, tick: Option<usize> },

    #[error("innovation variance {0} is not positive")]
    DegenerateInnovation(f64),

    #[error("series length mismatch: {0}")]
    LengthMismatch(String),

    #[error("non-uniform time grid at tick {tick}: expected {expected} s, found {found} s")]
    NonUniformTime { tick: usize, expected: f64, found: f64 },

    #[error("no cue in trace; cooperativeness is unobservable")]
    NoCue,

    #[error("trace too short: judgment needs {required:.3} s but trace ends at {available:.3} s")]
    TraceTooShort { required: f64, available: f64 },

    #[error("cue placement: {0}")]
    CuePlacement(String),

    #[error("{}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("{} already exists (pass force to overwrite)", .0.display())]
    AlreadyExists(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn tick_suffix(tick: Option<usize>) -> String {
    match tick {
        Some(t) => format!(" at tick {t}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Attach a tick index to errors raised inside a single filter step.
    pub(crate) fn at_tick(self, tick: usize) -> Self {
        match self {
            Error::NonFinite { what, .. } => Error::NonFinite { what, tick: Some(tick) },
            other => other,
        }
    }

    /// True for failures of the underlying filesystem, as opposed to bad content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
