use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("kernel is not symmetric: |H[{i},{j}] - H[{j},{i}]| = {gap:e}")]
    Asymmetric { i: usize, j: usize, gap: f64 },

    #[error("enumeration needs {needed} windows of length {len}; limit is {limit} windows and length 8")]
    EnumerationBudget { needed: f64, len: usize, limit: u64 },

    #[error("prior probability of symbol {symbol} is zero but Q assigns it mass at row {row}")]
    InfiniteDivergence { row: usize, symbol: usize },

    #[error("signal of {got} samples is shorter than the {need}-sample lag window")]
    SignalTooShort { got: usize, need: usize },

    #[error("training diverged at batch {batch}: loss = {loss}")]
    Diverged { batch: usize, loss: f64 },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
