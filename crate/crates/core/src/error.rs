use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A located diagnostic from one of the text front ends.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    /// 1-based.
    pub line: usize,
    /// 1-based.
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid element law: {0}")]
    Law(String),

    #[error("numerical failure: {message} (condition estimate {condition:e})")]
    Numerical { message: String, condition: f64 },

    #[error("iteration diverged: non-finite iterate at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error(
        "step sizes violate tau*sigma*|M|^2 < 1 (got {product}); pass an explicit override to run anyway"
    )]
    StepCondition { product: f64 },

    #[error("parse error: {0}")]
    Parse(#[from] ParseError),

    #[error("no hybrid representation exists for {}", describe_attempts(.attempted))]
    NoRepresentation { attempted: Vec<String> },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("invalid problem document: {0}")]
    Document(String),

    #[error("time-stepping oracle failed to converge at step {step}")]
    StepNotConverged { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn describe_attempts(attempted: &[String]) -> String {
    if attempted.is_empty() {
        return "the requested partition".to_string();
    }
    format!(
        "any of {} attempted partition(s): {}",
        attempted.len(),
        attempted.join("; ")
    )
}
