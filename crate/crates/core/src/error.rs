use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid null distribution: {0}")]
    Distribution(String),

    #[error("enumeration would visit {count} joint outcomes, above the cap of {cap}")]
    OutcomeCap { count: u128, cap: u128 },

    #[error("line {line}: {msg}")]
    Input { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
