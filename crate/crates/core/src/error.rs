use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeisError {
    #[error("dimension mismatch: expected n = {expected}, got n = {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },

    #[error("function `{name}` at position {pos} takes {expected} argument(s), got {got}")]
    Arity {
        pos: usize,
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("point is not on the horizontal plane of the center (defect {defect:e})")]
    OffPlane { defect: f64 },

    #[error("input is not convex along a horizontal ray: {0}")]
    NonConvex(String),

    #[error("section is unbounded in direction {direction:?}")]
    Unbounded { direction: Vec<f64> },

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("engulfing characterization fails at resolution: inf R = {inf_ratio}")]
    NotEngulfing { inf_ratio: f64 },

    #[error("condition diamond violated on a hop: excess {excess} >= {bound}")]
    DiamondViolated { excess: f64, bound: f64 },

    #[error("bracket cap exceeded: {0}")]
    BracketCap(String),
}

impl HeisError {
    /// Numerical failures (as opposed to bad input or configuration).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            HeisError::NonFinite(_)
                | HeisError::NonConvex(_)
                | HeisError::Unbounded { .. }
                | HeisError::ZeroDenominator(_)
                | HeisError::NotEngulfing { .. }
                | HeisError::DiamondViolated { .. }
                | HeisError::BracketCap(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, HeisError>;
