use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters, detected before any computation starts.
    #[error("configuration error: {0}")]
    Config(String),

    /// A configuration key failed validation.
    #[error("invalid value for `{key}`: {message}")]
    InvalidKey { key: String, message: String },

    #[error("unknown configuration key `{key}`{}", suggestion_suffix(.suggestion))]
    UnknownKey {
        key: String,
        suggestion: Option<String>,
    },

    /// Grid, kernel or field shapes disagree.
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: [usize; 3], found: [usize; 3] },

    /// A cell collapsed to (near) zero length before projection.
    #[error("numerical breakdown at cell ({}, {}, {}): |m| = {norm:e}", .cell[0], .cell[1], .cell[2])]
    Breakdown { cell: [usize; 3], norm: f64 },

    /// A stepper failure inside a time loop, tagged with the step index.
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("BDF2 step requested without two history levels")]
    MissingHistory,

    #[error("not found: {0}")]
    NotFound(String),

    /// A physical experiment finished in an unexpected state.
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {}: {message}", .path.display())]
    Parse { path: PathBuf, message: String },
}

fn suggestion_suffix(s: &Option<String>) -> String {
    match s {
        Some(s) => format!(" (did you mean `{s}`?)"),
        None => String::new(),
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// True when the root cause is a collapse of the unit-sphere constraint.
    pub fn is_breakdown(&self) -> bool {
        match self {
            Error::Breakdown { .. } => true,
            Error::AtStep { source, .. } => source.is_breakdown(),
            _ => false,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidKey { .. }
                | Error::UnknownKey { .. }
                | Error::ShapeMismatch { .. }
                | Error::Parse { .. }
        )
    }
}
