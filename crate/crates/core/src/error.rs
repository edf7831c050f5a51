//! Error types shared across the library.

use thiserror::Error;

/// Syntax error with a byte position into the offending input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} (at byte {position})")]
pub struct ParseError {
    pub message: String,
    pub position: usize,
}

impl ParseError {
    pub fn new(message: impl Into<String>, position: usize) -> Self {
        ParseError {
            message: message.into(),
            position,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("rule is not subcritical")]
    NotSubcritical,

    #[error("rule is not complete: coproduct right factor {offender} does not conform")]
    RuleIncomplete { offender: String },

    #[error("flavor mismatch: expected {expected}, found {found}")]
    FlavorMismatch { expected: String, found: String },

    #[error("cutoff exceeded: {0}")]
    CutoffExceeded(String),

    #[error("unbounded operator family: {0} requires a finite coordinate support")]
    UnboundedFamily(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-linearity does not obey the rule: derivative {0} is nonzero")]
    NotObeying(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
