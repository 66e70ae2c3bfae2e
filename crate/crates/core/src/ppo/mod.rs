//! Proximal policy optimization with a bounded surrogate for negative
//! advantages, GAE, and synchronous rollout collection.

mod gae;
mod loss;
mod rollout;
mod train;
mod update;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;
use crate::nn::NnError;

pub use gae::compute_gae;
pub use loss::{clipped_loss, clipped_loss_grad};
pub use rollout::{collect_sync, EpisodeStat, RolloutBuffer, Segment, Worker};
pub use train::{train, EnvFactory, LogRow, TrainOutcome, LOG_HEADER};
pub use update::{normalize_advantages, policy_loss_and_grad, ppo_update, value_loss_and_grad, MiniBatch, Learner, UpdateStats};

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("invalid ppo config: {0}")]
    Config(String),
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite loss; update rolled back")]
    NonFiniteLoss,
    #[error("every environment failed during collection")]
    NoRollouts,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// When and how far the learning rate and clip range decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecaySchedule {
    pub enabled: bool,
    /// Trailing success rate that starts the decay.
    pub trigger_success: f64,
    /// Episodes in the trailing window.
    pub window: usize,
    pub lr_floor: f64,
    pub eps_floor: f64,
}

impl Default for DecaySchedule {
    fn default() -> Self {
        Self {
            enabled: true,
            trigger_success: 0.5,
            window: 100,
            lr_floor: 0.0,
            eps_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip_eps: f64,
    /// Upper ratio bound `1 + beta` for negative advantages.
    pub stab_beta: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    pub gamma: f64,
    pub gae_tau: f64,
    pub minibatch_size: usize,
    pub steps_per_env: usize,
    pub epochs: usize,
    pub num_envs: usize,
    pub decay: DecaySchedule,
    /// Global gradient-norm clip per network; `None` disables it.
    pub max_grad_norm: Option<f64>,
    pub normalize_obs: bool,
    /// Stop the epoch loop once the minibatch KL estimate exceeds
    /// `1.5 * target_kl`; `None` disables early stopping.
    pub target_kl: Option<f64>,
    /// Range the learnable log standard deviations are kept in.
    pub log_std_bounds: (f64, f64),
    pub policy_hidden: Vec<usize>,
    /// Write a checkpoint every this many updates (0: only at the end).
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            stab_beta: 1.0,
            entropy_coef: 0.001,
            value_coef: 0.5,
            lr: 0.007,
            gamma: 0.99,
            gae_tau: 0.95,
            minibatch_size: 16,
            steps_per_env: 32,
            epochs: 4,
            num_envs: 1,
            decay: DecaySchedule::default(),
            max_grad_norm: Some(0.5),
            normalize_obs: true,
            target_kl: Some(0.01),
            log_std_bounds: (-5.0, 0.0),
            policy_hidden: crate::nn::POLICY_HIDDEN.to_vec(),
            checkpoint_every: 0,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::Config(m.to_string()));
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if !(self.stab_beta > 0.0) {
            return bad("stab_beta must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_tau) {
            return bad("gae_tau must lie in [0, 1]");
        }
        if !(self.lr > 0.0) || self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return bad("lr must be positive and coefficients nonnegative");
        }
        if self.minibatch_size == 0 || self.steps_per_env == 0 || self.epochs == 0 || self.num_envs == 0 {
            return bad("minibatch_size, steps_per_env, epochs and num_envs must be >= 1");
        }
        if self.policy_hidden.is_empty() {
            return bad("policy needs at least one hidden layer");
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self, PpoError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| PpoError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Environment steps consumed by one update.
    pub fn batch_steps(&self) -> usize {
        self.num_envs * self.steps_per_env
    }
}

/// `initial * (1 - progress)`.
pub fn linear_decay(initial: f64, progress: f64) -> f64 {
    initial * (1.0 - progress.clamp(0.0, 1.0))
}
