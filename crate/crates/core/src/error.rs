use std::io;

use thiserror::Error;

pub type Result<T, E = NsvError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NsvError {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// A velocity sampler was asked for a time outside its coverage.
    #[error("sampler queried at t = {t} outside its range [{start}, {end}]")]
    SamplerRange { t: f64, start: f64, end: f64 },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("config syntax error: {0}")]
    ConfigSyntax(String),

    #[error("unknown initial-data generator `{0}`")]
    UnknownGenerator(String),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error("picard iteration did not converge at t = {t} after {retries} window halvings")]
    NonConvergence { t: f64, retries: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl NsvError {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        NsvError::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        NsvError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
