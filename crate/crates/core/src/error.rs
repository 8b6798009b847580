use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("wave functions live on different grids")]
    GridMismatch,

    #[error("non-finite entry at index {0}")]
    NonFinite(usize),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("invalid potential family `{name}`: {reason}")]
    InvalidFamily { name: String, reason: String },

    #[error("shift mu = {mu} is below the admissible minimum {mu_min} (worst point x = {x:?}, xi = {xi:?})")]
    InadmissibleShift {
        mu: f64,
        mu_min: f64,
        x: Vec<f64>,
        xi: Vec<f64>,
    },

    #[error("iterative solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
