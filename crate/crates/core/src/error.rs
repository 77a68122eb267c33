use thiserror::Error;

/// Two operands disagree on their dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("shape mismatch in {op}: {left} vs {right}")]
pub struct ShapeError {
    pub op: &'static str,
    pub left: String,
    pub right: String,
}

impl ShapeError {
    pub fn new(op: &'static str, left: impl std::fmt::Debug, right: impl std::fmt::Debug) -> Self {
        ShapeError {
            op,
            left: format!("{left:?}"),
            right: format!("{right:?}"),
        }
    }
}
