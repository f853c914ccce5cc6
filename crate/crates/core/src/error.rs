use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("singularity at x = {x}: {what}")]
    Singularity { x: f64, what: String },
    #[error("unsupported order n = {0}")]
    UnsupportedOrder(u32),
    #[error("argument outside the {0} regime")]
    Regime(String),
    #[error("quadrature missed tolerance: estimate {value}, error estimate {error}")]
    Quadrature { value: f64, error: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
