use thiserror::Error;

use crate::solver::SolverFailure;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("mesh generation error: {0}")]
    MeshGeneration(String),

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("degenerate flow: {0}")]
    DegenerateFlow(String),

    #[error(transparent)]
    Solver(#[from] SolverFailure),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("activation cache does not match the current parameters")]
    StaleCache,

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("episode is finished; reset before stepping again")]
    EpisodeFinished,

    #[error("{algorithm} does not support the {strategy} strategy")]
    Incompatible {
        algorithm: &'static str,
        strategy: &'static str,
    },

    #[error("environment {env_id}: {source}")]
    VecEnv {
        env_id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("run config: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
