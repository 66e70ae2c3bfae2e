//! Small fully connected networks with hand-written backpropagation, a
//! diagonal Gaussian policy head, Adam, and running observation statistics.

mod adam;
mod checkpoint;
mod mlp;
mod normalize;
mod policy;

use thiserror::Error;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use mlp::{orthogonal, Activation, Mlp};
pub use normalize::RunningNorm;
pub use policy::{entropy, log_prob, GaussianPolicy, ValueNet, POLICY_HIDDEN, VALUE_HIDDEN};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("backward called without a cached forward pass")]
    NoForwardCache,
    #[error("network needs at least one hidden layer and positive widths")]
    InvalidSpec,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
