//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("frequency must be positive, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode is terminal; call reset before stepping")]
    EpisodeTerminal,
    #[error("action index {index} out of range for {num_actions} actions")]
    InvalidAction { index: usize, num_actions: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("input length {got} does not match network input dimension {expected}")]
    InputDimension { expected: usize, got: usize },
    #[error("network shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("non-finite loss {loss} after {grad_steps} gradient steps")]
    NonFiniteLoss { loss: f64, grad_steps: u64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid network layout: {0}")]
    InvalidLayout(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint format_version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint input dimension {checkpoint} does not match configured dimension {configured}")]
    DimensionMismatch { checkpoint: usize, configured: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at episode {episode}: {source}")]
    Divergence {
        episode: usize,
        last_checkpoint_episode: Option<usize>,
        #[source]
        source: DqnError,
    },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Dqn(#[from] DqnError),
    #[error("checkpoint sink failed: {0}")]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{num_rcs} radio cards exceed the enumeration guard of {guard}; reduce the number of RUs or RCs per RU")]
    TooManyRadioCards { num_rcs: usize, guard: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}
