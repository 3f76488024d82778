use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A Gram matrix that must be inverted is (numerically) singular.
    #[error("singular system in {context}: condition number {condition:.3e}")]
    SingularSystem { context: &'static str, condition: f64 },

    /// A hypothesis required by a recovery bound does not hold.
    #[error("condition violated: {0}")]
    ConditionViolated(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
