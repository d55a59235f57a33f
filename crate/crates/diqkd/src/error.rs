use thiserror::Error;

/// Errors produced by the simulation and optimization layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("constraint error: {0}")]
    Constraint(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("sampling exhausted after {attempts} attempts: {detail}")]
    SeedExhausted { attempts: usize, detail: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }
}
