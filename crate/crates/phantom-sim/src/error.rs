use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{op}: {detail}")]
    Invalid { op: String, detail: String },
    #[error("ellipsoid {index} escapes the slice's inscribed circle: {detail}")]
    Escape { index: usize, detail: String },
    #[error("output path {path} already exists (pass overwrite to replace it)")]
    Collision { path: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Tomo(#[from] tomo_core::TomoError),
    #[error(transparent)]
    Engine(#[from] tensor_engine::EngineError),
}

impl SimError {
    pub(crate) fn invalid(op: &str, detail: impl Into<String>) -> Self {
        SimError::Invalid { op: op.to_string(), detail: detail.into() }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        SimError::Io { path: path.display().to_string(), source }
    }
}
