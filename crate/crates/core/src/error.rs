use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value outside support: {0}")]
    Domain(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("uncertainty set is empty at interval {interval}: sum range [{lo}, {hi}] misses budget range [{budget_lo}, {budget_hi}]")]
    EmptySet {
        interval: usize,
        lo: f64,
        hi: f64,
        budget_lo: f64,
        budget_hi: f64,
    },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex failed: {0}")]
    Numerical(String),

    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
