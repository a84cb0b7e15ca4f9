use thiserror::Error;

/// Errors raised by forest construction, estimation and the simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or unusable input data.
    #[error("input error: {0}")]
    Input(String),
    /// Parameters outside their admissible domain.
    #[error("configuration error: {0}")]
    Config(String),
    /// A quantity could not be estimated from the available out-of-bag rows.
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }
}
