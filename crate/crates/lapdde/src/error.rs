use thiserror::Error;

/// Toolkit-wide error type. `Config` covers everything that should have been
/// caught by input validation, `OutOfRange` covers queries outside the data
/// actually stored, and `Io` is reserved for filesystem failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn out_of_range(msg: impl Into<String>) -> Self {
        Error::OutOfRange(msg.into())
    }

    /// Exit code for the CLI: 2 for validation problems, 3 for runtime ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::OutOfRange(_) | Error::Json(_) => 2,
            Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
