use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Carries the last iterate so callers can still inspect it.
    #[error("group lasso did not converge after {iterations} sweeps (relative change {change:e})")]
    Convergence {
        iterations: usize,
        change: f64,
        last: Box<DMatrix<f64>>,
    },

    #[error("fold {fold} has {rows} rows, at least 2 are required")]
    FoldSize { fold: usize, rows: usize },

    #[error("order {z} needs more than {z} curves, got {curves}")]
    InsufficientLags { z: usize, curves: usize },

    #[error("recursion diverged at curve {index} (norm {norm:e})")]
    Unstable { index: usize, norm: f64 },

    #[error("{family} is undefined at x = {x}")]
    Domain { family: &'static str, x: f64 },

    #[error("non-finite state at step {step}")]
    BlowUp { step: usize },

    #[error("cannot split path: {0}")]
    Split(String),

    #[error("unrestricted fit has zero residual sum of squared norms")]
    PerfectFit,

    #[error("ingestion failed: {0}")]
    Ingest(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
