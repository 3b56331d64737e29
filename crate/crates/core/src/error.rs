use thiserror::Error;

pub type Result<T> = std::result::Result<T, DppmError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DppmError {
    #[error("invalid spectrum: entry {index} is {value}, must be positive")]
    InvalidSpectrum { index: usize, value: f64 },

    #[error("gradient vanishes at the current point")]
    Stationary,

    #[error("not a descent direction: directional derivative is {0}")]
    NonDescent(f64),

    #[error("no convex segment detected along the direction")]
    DegenerateSegment,

    #[error("objective is not finite at step {0}")]
    NonFinite(f64),

    #[error("dual function is unbounded above; linearized constraints are infeasible")]
    UnboundedDual,

    #[error("rank-one update is singular: 1 + t p'Qp = {0}")]
    SingularUpdate(f64),

    #[error("schedule growth factor must exceed 1, got {0}")]
    InvalidSchedule(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
