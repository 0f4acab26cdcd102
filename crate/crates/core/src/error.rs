use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("nonconvex expression: {0}")]
    NotConvex(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("integer variable {0} is not boxed by finite bounds")]
    UnboundedInteger(usize),

    #[error("subproblem failure: {0}")]
    Subproblem(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("node limit of {limit} reached (incumbent value {incumbent_value})")]
    NodeLimit {
        limit: usize,
        incumbent: Option<Vec<f64>>,
        incumbent_value: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
