use thiserror::Error;

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("invalid network configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Divergence { epoch: usize, step: usize, detail: String },

    #[error("weights format error: {0}")]
    Format(String),

    #[error(transparent)]
    Core(#[from] gridfree_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CnnError>;
