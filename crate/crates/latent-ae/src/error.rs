use thiserror::Error;

#[derive(Debug, Error)]
pub enum AeError {
    #[error("{op}: {detail}")]
    Invalid { op: String, detail: String },
    #[error("training loss became non-finite at step {step}")]
    NonFinite { step: u64 },
    #[error("checkpoint is missing parameter {name}")]
    MissingParam { name: String },
    #[error(transparent)]
    Engine(#[from] tensor_engine::EngineError),
    #[error(transparent)]
    Tomo(#[from] tomo_core::TomoError),
}

impl AeError {
    pub(crate) fn invalid(op: &str, detail: impl Into<String>) -> Self {
        AeError::Invalid { op: op.to_string(), detail: detail.into() }
    }
}
