use thiserror::Error;

/// Errors raised by model construction, the oracle and the learners.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("behavior chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("behavior policy has zero probability for action {action} in state {state}")]
    ZeroBehaviorProbability { state: usize, action: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("{learner} diverged at step {step}")]
    Divergence { learner: &'static str, step: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
