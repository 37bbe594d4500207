use thiserror::Error;

/// Errors produced by the solver and oracle layers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unbalanced inputs: sum(p) = {sum_p:.6e}, sum(q) = {sum_q:.6e}")]
    Unbalanced { sum_p: f64, sum_q: f64 },

    /// An iterative solve ran out of its iteration budget. `history` holds a
    /// downsampled trace of the fixed-point residual for diagnostics.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
