use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::target::{sample_target, TargetDomain, TargetSpec};
use super::EnvError;
use crate::dynamics::{self, ChainModel, ExcitationVector, ModelState, DEFAULT_DT};
use crate::fdat::CostWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Squared distance between stacked orientations below which the target
    /// counts as reached.
    pub reach_threshold: f64,
    pub max_episode_steps: usize,
    pub bonus: f64,
    pub reward_weights: CostWeights,
    pub target_domain: TargetDomain,
    /// Append the target orientations to the observation.
    pub include_target: bool,
    pub dt: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            reach_threshold: 0.05,
            max_episode_steps: 30,
            bonus: 5.0,
            reward_weights: CostWeights::default(),
            target_domain: TargetDomain::default(),
            include_target: true,
            dt: DEFAULT_DT,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.reach_threshold > 0.0) {
            return Err(EnvError::Config("reach_threshold must be positive".into()));
        }
        if self.max_episode_steps == 0 {
            return Err(EnvError::Config("max_episode_steps must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(EnvError::Config("dt must be positive".into()));
        }
        self.reward_weights
            .validate()
            .map_err(|e| EnvError::Config(e.to_string()))
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| EnvError::Config(format!("{}: {e}", path.as_ref().display())))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| EnvError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

/// Squared norm of the stacked quaternion differences, each block of `u`
/// flipped into the hemisphere of the matching target block.
pub fn squared_distance(u: &[f64], target: &[f64]) -> f64 {
    target
        .chunks(4)
        .zip(u.chunks(4))
        .map(|(t, q)| {
            let dot: f64 = t.iter().zip(q).map(|(a, b)| a * b).sum();
            let s = if dot < 0.0 { -1.0 } else { 1.0 };
            t.iter().zip(q).map(|(a, b)| (a - s * b).powi(2)).sum::<f64>()
        })
        .sum()
}

/// Reaching bonus minus the weighted tracking, smoothness and effort costs.
pub fn reward(u: &[f64], target: &[f64], a: &[f64], a_prev: &[f64], config: &EnvConfig) -> f64 {
    let w = &config.reward_weights;
    let d2 = squared_distance(u, target);
    let bonus = if d2 < config.reach_threshold { config.bonus } else { 0.0 };
    bonus
        - w.w_u * d2 / (2.0 * w.delta_t)
        - w.w_d * CostWeights::phi_d(a, a_prev)
        - w.w_r * CostWeights::phi_r(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    Reached,
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepInfo {
    /// Squared distance to the target after the step.
    pub distance: f64,
    pub activation_norm: f64,
    pub activation_delta: f64,
    pub reason: Option<TerminalReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub info: StepInfo,
}

/// Policy input for `state`: current body orientations, optionally followed
/// by the target orientations.
pub fn observation(model: &ChainModel, state: &ModelState, target_feature: &DVector<f64>, include_target: bool) -> Vec<f64> {
    let u = dynamics::pose_feature(model, state);
    let mut obs: Vec<f64> = u.rows(0, 4 * model.num_bodies()).iter().copied().collect();
    if include_target {
        obs.extend(target_feature.iter());
    }
    obs
}

/// Anything that behaves like an episodic environment: in-process or remote.
pub trait EnvHandle: Send {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    /// Start a new episode. `Some(seed)` reseeds the target sampler.
    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, EnvError>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;
}

#[derive(Debug, Clone)]
pub struct SpineEnv {
    model: Arc<ChainModel>,
    config: EnvConfig,
    rng: ChaCha8Rng,
    state: ModelState,
    target: TargetSpec,
    target_feature: DVector<f64>,
    a_prev: Vec<f64>,
    steps: usize,
    ready: bool,
}

impl SpineEnv {
    pub fn new(model: Arc<ChainModel>, config: EnvConfig) -> Result<Self, EnvError> {
        model.validate()?;
        config.validate()?;
        let n = model.num_bodies();
        let target = super::target::target_from_top(nalgebra::UnitQuaternion::identity(), n);
        Ok(Self {
            state: model.rest_state(),
            target_feature: target.feature(),
            target,
            a_prev: vec![0.0; model.num_muscles()],
            rng: ChaCha8Rng::seed_from_u64(0),
            steps: 0,
            ready: false,
            model,
            config,
        })
    }

    pub fn model(&self) -> &Arc<ChainModel> {
        &self.model
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn target(&self) -> &TargetSpec {
        &self.target
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Orientation blocks of the current pose feature.
    pub fn orientation_feature(&self) -> DVector<f64> {
        let u = dynamics::pose_feature(&self.model, &self.state);
        u.rows(0, 4 * self.model.num_bodies()).into_owned()
    }

    pub fn observation(&self) -> Vec<f64> {
        observation(&self.model, &self.state, &self.target_feature, self.config.include_target)
    }

    /// Start an episode at the rest state with a given target.
    pub fn reset_with_target(&mut self, target: TargetSpec) -> Result<Vec<f64>, EnvError> {
        if target.num_bodies() != self.model.num_bodies() {
            return Err(EnvError::Config(format!(
                "target has {} bodies, model has {}",
                target.num_bodies(),
                self.model.num_bodies()
            )));
        }
        self.state = self.model.rest_state();
        self.target_feature = target.feature();
        self.target = target;
        self.a_prev.iter_mut().for_each(|v| *v = 0.0);
        self.steps = 0;
        self.ready = true;
        Ok(self.observation())
    }
}

impl EnvHandle for SpineEnv {
    fn obs_dim(&self) -> usize {
        let q = 4 * self.model.num_bodies();
        if self.config.include_target {
            2 * q
        } else {
            q
        }
    }

    fn act_dim(&self) -> usize {
        self.model.num_muscles()
    }

    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        let target = sample_target(&mut self.rng, self.model.num_bodies(), &self.config.target_domain);
        self.reset_with_target(target)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if !self.ready {
            return Err(EnvError::AwaitingReset);
        }
        if action.len() != self.act_dim() {
            return Err(EnvError::ActionLength {
                expected: self.act_dim(),
                got: action.len(),
            });
        }
        let a = ExcitationVector::clipped(action);
        self.state = match dynamics::step(&self.model, &self.state, &a, self.config.dt) {
            Ok(s) => s,
            Err(e) => {
                self.ready = false;
                return Err(e.into());
            }
        };
        self.steps += 1;
        let u = self.orientation_feature();
        let target = self.target_feature.as_slice();
        let d2 = squared_distance(u.as_slice(), target);
        let r = reward(u.as_slice(), target, &a, &self.a_prev, &self.config);
        let reason = if d2 < self.config.reach_threshold {
            Some(TerminalReason::Reached)
        } else if self.steps >= self.config.max_episode_steps {
            Some(TerminalReason::StepLimit)
        } else {
            None
        };
        let info = StepInfo {
            distance: d2,
            activation_norm: a.iter().map(|v| v * v).sum::<f64>().sqrt(),
            activation_delta: a
                .iter()
                .zip(&self.a_prev)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            reason,
        };
        self.a_prev.copy_from_slice(&a);
        if reason.is_some() {
            self.ready = false;
        }
        Ok(StepResult {
            observation: self.observation(),
            reward: r,
            terminal: reason.is_some(),
            info,
        })
    }
}
