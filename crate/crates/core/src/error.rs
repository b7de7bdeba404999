use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Shapes or indices that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("non-finite input at index {index}")]
    NumericInput { index: usize },

    /// Active-set projection did not reach a KKT point.
    #[error("treeplex projection failed after {iterations} iterations (KKT residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    /// Parameters outside the range an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),
}
