use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid configuration value or incompatible dimensions.
    #[error("configuration error: {0}")]
    Config(String),
    /// A tape recorded against a network of a different shape.
    #[error("stale activation tape: {0}")]
    StaleTape(String),
    /// Non-finite values appeared during optimisation.
    #[error("training diverged in {module}: {detail}")]
    Divergence { module: String, detail: String },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn divergence(module: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Divergence {
            module: module.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Config(alloc::format!(
            "{what}: expected length {expected}, got {got}"
        )));
    }
    Ok(())
}
