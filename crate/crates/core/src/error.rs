use thiserror::Error;

/// Crate-wide error type. Library code never panics on recoverable
/// conditions; anything a caller can act on comes through here.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("simulation error: {0}")]
    Sim(String),

    #[error("gradient error: {0}")]
    Gradient(String),

    #[error("environment error: {0}")]
    Env(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
