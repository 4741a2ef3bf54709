use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {z}) lies outside {domain}")]
    Domain { x: f64, z: f64, domain: &'static str },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },
    #[error("structural mismatch: {0}")]
    Structure(String),
    #[error("singular system: zero pivot in block {block} at row {row}")]
    Singular { block: String, row: usize },
    #[error("conditioning check failed: {0}")]
    Conditioning(String),
    #[error("problem too large: {0}")]
    Size(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("expression `{expr}`: {reason}")]
    Expression { expr: String, reason: String },
    #[error("solve failed at eps = {eps}: {source}")]
    Sweep { eps: f64, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parameter { name: name.into(), reason: reason.into() }
    }
}
