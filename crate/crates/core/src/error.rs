use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: filter width {r} must satisfy 1 <= r <= d = {d}")]
    InvalidTopology { d: usize, r: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("mask {mask} owns {have} neurons but at least {need} are required (n + 1)")]
    Capacity { mask: usize, have: usize, need: usize },

    #[error("coefficient budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("inner gradient descent did not converge within {cap} iterations (last gradient norm {grad_norm:e}, tolerance {tol:e})")]
    NonConvergence { cap: usize, grad_norm: f64, tol: f64 },

    #[error("no inactive neuron with |alpha| <= {threshold} on mask {mask}")]
    StaleGd { mask: usize, threshold: f64 },

    #[error("exhaustive grid needs {size} evaluations (cap {cap}); use the randomized solver")]
    InfeasibleSolver { size: f64, cap: f64 },

    #[error("oracle supports effective dimension <= 3, got {0}")]
    UnsupportedDimension(usize),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("data generation failed after {attempts} draws (acceptance rate {rate:.3e}): {reason}")]
    Generation { attempts: usize, rate: f64, reason: String },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
