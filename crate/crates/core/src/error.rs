use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A numeric or structural parameter is outside its supported range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// Two inputs that must agree in size do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// An experiment configuration is inconsistent. `keys` names the offending keys.
    #[error("config error [{}]: {message}", keys.join(", "))]
    Config { keys: Vec<String>, message: String },
    /// Reading or writing a file failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(keys: &[&str], message: impl Into<String>) -> Self {
        Error::Config {
            keys: keys.iter().map(|k| k.to_string()).collect(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
