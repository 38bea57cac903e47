use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("ineffective hidden neuron: mask row {row} is all zero")]
    IneffectiveNeuron { row: usize },

    #[error("network not effective: {0}")]
    NotEffective(String),

    #[error("masked entry ({row}, {col}) of layer {layer} holds nonzero weight {value}")]
    MaskViolation {
        layer: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("condition violated: {0}")]
    ConditionViolated(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn shape_err(
    context: &'static str,
    expected: impl Into<String>,
    actual: impl Into<String>,
) -> Error {
    Error::ShapeMismatch {
        context,
        expected: expected.into(),
        actual: actual.into(),
    }
}
