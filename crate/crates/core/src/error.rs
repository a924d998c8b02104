use thiserror::Error;

/// Errors raised by the geometry, injection, attention and harness layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DragError {
    #[error("control points {first} and {second} coincide but carry different drag vectors")]
    ConflictingControlPoints { first: usize, second: usize },

    #[error("source region is empty")]
    EmptySourceRegion,

    #[error("step {step} outside schedule of {total} steps")]
    InvalidStep { step: usize, total: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("blend coefficient {0} outside [0, 1]")]
    InvalidLambda(f64),

    #[error("token {0} has no grid position")]
    MissingPosition(usize),

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl DragError {
    /// Stable machine-readable code, used in CLI and HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            DragError::ConflictingControlPoints { .. } => "ConflictingControlPoints",
            DragError::EmptySourceRegion => "EmptySourceRegion",
            DragError::InvalidStep { .. } => "InvalidStep",
            DragError::ShapeMismatch(_) => "ShapeMismatch",
            DragError::InvalidLambda(_) => "InvalidLambda",
            DragError::MissingPosition(_) => "MissingPosition",
            DragError::NonFiniteInput(_) => "NonFiniteInput",
            DragError::InvalidConfig(_) => "InvalidConfig",
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        DragError::ShapeMismatch(msg.into())
    }
}

pub type Result<T, E = DragError> = std::result::Result<T, E>;
