use thiserror::Error;

use crate::metric::MetricViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid shape: {0}")]
    Shape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("infeasible field: {0}")]
    Infeasible(String),

    #[error("invalid metric: {} violation(s), first: {:?}", .0.len(), .0.first())]
    InvalidMetric(Vec<MetricViolation>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("operation requires exactly two labels, got {0}")]
    NotTwoClass(usize),

    #[error("rounding did not terminate within {k_max} iterations ({unassigned} pixel(s) left)")]
    RoundingBudget { k_max: usize, unassigned: usize },

    #[error("{failed} of {total} rounding samples hit the iteration budget")]
    TooManyRoundingFailures { failed: usize, total: usize },

    #[error("certificate undefined: dual energy {0} is not positive")]
    NonPositiveDual(f64),

    #[error("degenerate certificate: {0}")]
    Degenerate(String),
}
