use thiserror::Error;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("{op}: {detail}")]
    Invalid { op: &'static str, detail: String },
    #[error(transparent)]
    Engine(#[from] tensor_engine::EngineError),
}

impl TomoError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        TomoError::Shape { op, detail: detail.into() }
    }

    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        TomoError::Invalid { op, detail: detail.into() }
    }
}
