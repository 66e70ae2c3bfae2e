//! Episodic target-reaching environment over the chain dynamics.

mod spine;
mod target;

use thiserror::Error;

use crate::dynamics::DynamicsError;

pub use spine::{observation, reward, squared_distance, EnvConfig, EnvHandle, SpineEnv, StepInfo, StepResult, TerminalReason};
pub use target::{sample_target, target_from_top, TargetDomain, TargetSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("action length: expected {expected}, got {got}")]
    ActionLength { expected: usize, got: usize },
    #[error("episode is over; call reset before stepping")]
    AwaitingReset,
    #[error("invalid env config: {0}")]
    Config(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("remote environment: {0}")]
    Remote(String),
}
