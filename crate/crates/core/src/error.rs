use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum CraneError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("parse error at demand {index}: {message}")]
    DemandParse { index: usize, message: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("unsupported dimension {dimension}: {message}")]
    UnsupportedDimension { dimension: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CraneError>;
