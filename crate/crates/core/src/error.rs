use thiserror::Error;

/// Errors raised anywhere in the evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("enumeration needs {needed} configurations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }

    pub(crate) fn constraint(message: impl Into<String>) -> Self {
        Error::Constraint(message.into())
    }

    /// Process exit status for this error: 2 for unreadable or malformed
    /// input, 3 for constraint violations, 4 for oracle mismatches.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io(_) | Error::Json(_) => 2,
            Error::Invalid(_) | Error::Constraint(_) | Error::BudgetExceeded { .. } => 3,
            Error::OracleMismatch(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
