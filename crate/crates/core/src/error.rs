use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("episode already finished")]
    EpisodeFinished,

    #[error("invalid fixed-timing plan: {0}")]
    InvalidPlan(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("misaligned inputs: {0} vs {1} slots")]
    Misaligned(usize, usize),

    #[error("infeasible pattern packing: {0}")]
    InfeasiblePacking(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("advantage grid has no sign change")]
    NoSignChange,

    #[error("config error: {0}")]
    Config(String),

    #[error("manifest hash mismatch: {0}")]
    ManifestMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
