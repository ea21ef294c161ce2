use thiserror::Error;

pub type Result<T> = std::result::Result<T, GatewayError>;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] nordwatch_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GatewayError {
    /// Process exit code: 2 for configuration problems, 3 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            GatewayError::Config(_) => 2,
            GatewayError::Data(_) | GatewayError::Io(_) | GatewayError::Json(_) => 3,
            GatewayError::Core(e) if e.is_data_error() => 3,
            GatewayError::Core(_) => 2,
        }
    }
}
