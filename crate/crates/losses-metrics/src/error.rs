use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("{op}: {detail}")]
    Shape { op: String, detail: String },
    #[error("{op}: {detail}")]
    Invalid { op: String, detail: String },
    #[error("loss term `{term}` is not finite")]
    NonFinite { term: String },
    #[error(transparent)]
    Engine(#[from] tensor_engine::EngineError),
    #[error(transparent)]
    Tomo(#[from] tomo_core::TomoError),
}

impl MetricError {
    pub(crate) fn shape(op: &str, detail: impl Into<String>) -> Self {
        MetricError::Shape { op: op.to_string(), detail: detail.into() }
    }

    pub(crate) fn invalid(op: &str, detail: impl Into<String>) -> Self {
        MetricError::Invalid { op: op.to_string(), detail: detail.into() }
    }

    pub(crate) fn non_finite(term: &str) -> Self {
        MetricError::NonFinite { term: term.to_string() }
    }
}
