use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument outside the domain of a physical or numerical function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A malformed or out-of-range scenario entry, identified by key path.
    #[error("{key}: {message}")]
    Config { key: String, message: String },
    /// Failure while evaluating a scenario.
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// `true` for errors that stem from the input document rather than evaluation.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
