use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("class index {index} out of range (C = {classes})")]
    ClassIndex { index: usize, classes: usize },

    #[error("pixel index {index} out of range (d = {dim})")]
    PixelIndex { index: usize, dim: usize },

    #[error("unsupported operation on tape: {0}")]
    UnsupportedOp(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("training diverged (loss is not finite) at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("weight blob length mismatch: expected {expected} bytes, got {got}")]
    BlobLength { expected: usize, got: usize },

    #[error("mask set: {0}")]
    Mask(String),

    #[error("interaction set of size {0} too large for exact enumeration (max 20)")]
    SetTooLarge(usize),

    #[error("saliency map is all-zero; sparsity undefined")]
    ZeroSaliency,

    #[error("all pixels removed; imputation has no boundary condition")]
    NoBoundary,

    #[error("zero variance in sampled series; correlation undefined")]
    ZeroVariance,

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
