use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("derivative not supported: {0}")]
    UnsupportedDerivative(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("capacity condition violated: {0}")]
    Capacity(String),

    #[error("degenerate kernel: lambda_min = {lambda_min:e}, lambda_max = {lambda_max:e}")]
    DegenerateKernel { lambda_min: f64, lambda_max: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("self-consistency check failed: {0}")]
    Consistency(String),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
