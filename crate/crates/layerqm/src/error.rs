use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("energy {0} sits on a threshold")]
    Threshold(f64),
    #[error("singular input: {0}")]
    Singular(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("Krein matrix is singular at z = {0}; an embedded eigenvalue blocks the S-operator")]
    EmbeddedEigenvalue(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
