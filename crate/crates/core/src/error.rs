use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite objective value at agent {agent}")]
    NonFiniteEnergy { agent: usize },

    #[error("non-finite position for agent {agent} at step {step}")]
    NonFinitePosition { agent: usize, step: usize },

    #[error("no agent currently holds the leader label")]
    EmptyLeaderSet,

    #[error("invalid configuration key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("run failed at sweep value {sweep_value}, repetition {repetition}: {source}")]
    Run {
        sweep_value: f64,
        repetition: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
