use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pyramid: {0}")]
    InvalidPyramid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse error class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Format,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidPyramid(_) | Error::InvalidArgument(_) | Error::Config(_) => {
                ErrorClass::Usage
            }
            Error::Format(_) | Error::Corrupt(_) | Error::Io(_) | Error::Image(_) | Error::Csv(_) => {
                ErrorClass::Format
            }
            Error::UndefinedMetric(_) | Error::Numeric(_) => ErrorClass::Numeric,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
