use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the analysis kernels.
///
/// Variants fall into two families: data problems (bad rows, unknown labels,
/// violated preconditions) and numerical failures (singular designs, undefined
/// statistics). [`Error::is_numerical`] tells them apart for exit-code mapping.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("empty input")]
    EmptyInput,

    #[error("unknown country code `{0}`")]
    UnknownCountry(String),

    #[error("unknown disease category `{0}`")]
    UnknownDisease(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("singular design: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn undefined(msg: impl Into<String>) -> Self {
        Error::Undefined(msg.into())
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::Numerical(_) | Error::Undefined(_)
        )
    }
}
