use thiserror::Error;

use crate::stream::SensorAddress;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty stream: {0}")]
    EmptyStream(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("calibration insufficient for {channel}: {reason}")]
    CalibrationChannel { channel: String, reason: String },

    #[error("calibration insufficient: {0}")]
    Calibration(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("tag coverage error: clusters {clusters:?} received no tag")]
    Coverage { clusters: Vec<usize> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn calibration_channel(address: &SensorAddress, reason: impl Into<String>) -> Self {
        Error::CalibrationChannel {
            channel: address.to_string(),
            reason: reason.into(),
        }
    }

    /// Data errors (unreadable or unusable input) as opposed to configuration errors.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::EmptyStream(_)
                | Error::Io(_)
                | Error::Calibration(_)
                | Error::CalibrationChannel { .. }
        )
    }
}
