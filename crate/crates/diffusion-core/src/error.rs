use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{op}: {detail}")]
    Invalid { op: String, detail: String },
    #[error("checkpoint is missing parameter {name}")]
    MissingParam { name: String },
    #[error(transparent)]
    Engine(#[from] tensor_engine::EngineError),
    #[error(transparent)]
    Tomo(#[from] tomo_core::TomoError),
    #[error(transparent)]
    Ae(#[from] latent_ae::AeError),
}

impl DiffError {
    pub(crate) fn invalid(op: &str, detail: impl Into<String>) -> Self {
        DiffError::Invalid { op: op.to_string(), detail: detail.into() }
    }
}
