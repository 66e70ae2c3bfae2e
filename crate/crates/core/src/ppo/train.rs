use std::collections::VecDeque;
use std::fs::{self, OpenOptions};
use std::path::Path;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rollout::{collect_sync, EpisodeStat, Worker};
use super::update::{ppo_update, Learner};
use super::{linear_decay, PpoConfig, PpoError};
use crate::env::{EnvError, EnvHandle};
use crate::nn::Checkpoint;

/// Builds the environment for worker `i`.
pub type EnvFactory<'a> = dyn Fn(usize) -> Result<Box<dyn EnvHandle>, EnvError> + Sync + 'a;

pub const LOG_HEADER: [&str; 8] = ["step", "meanReturn", "successRate", "policyLoss", "valueLoss", "entropy", "lr", "eps"];

/// One line of the training log, written after every update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogRow {
    pub step: u64,
    /// Trailing-window mean episode reward.
    pub mean_return: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub lr: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub learner: Learner,
    pub log: Vec<LogRow>,
    pub step: u64,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        self.learner.to_checkpoint(self.step)
    }
}

fn window_stats(window: &VecDeque<EpisodeStat>) -> (f64, f64) {
    if window.is_empty() {
        return (0.0, 0.0);
    }
    let n = window.len() as f64;
    let ret = window.iter().map(|e| e.total_reward).sum::<f64>() / n;
    let succ = window.iter().filter(|e| e.reached).count() as f64 / n;
    (ret, succ)
}

/// Collect, estimate advantages and update until `total_steps` environment
/// steps are used up. Writes `train_log.csv` and `checkpoint.json` into
/// `out_dir` when given; `resume` continues from a saved checkpoint.
pub fn train(
    factory: &EnvFactory,
    cfg: &PpoConfig,
    total_steps: u64,
    out_dir: Option<&Path>,
    resume: Option<Checkpoint>,
) -> Result<TrainOutcome, PpoError> {
    cfg.validate()?;
    let envs = (0..cfg.num_envs).map(factory).collect::<Result<Vec<_>, _>>()?;
    let (obs_dim, act_dim) = (envs[0].obs_dim(), envs[0].act_dim());
    let mut step = resume.as_ref().map_or(0, |c| c.step);
    let mut learner = match resume {
        Some(ck) => Learner::from_checkpoint(ck),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            Learner::new(obs_dim, act_dim, cfg, &mut rng)?
        }
    };
    if learner.policy.obs_dim() != obs_dim || learner.policy.act_dim() != act_dim {
        return Err(PpoError::Config(format!(
            "policy is {}->{}, environment is {obs_dim}->{act_dim}",
            learner.policy.obs_dim(),
            learner.policy.act_dim()
        )));
    }

    let round = step / cfg.batch_steps() as u64;
    let mut workers: Vec<Worker> = envs
        .into_iter()
        .enumerate()
        .map(|(i, env)| {
            let reset_seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64 + round * 7919);
            Worker::new(env, reset_seed, cfg.seed.wrapping_add(round), 1 + i as u64)
        })
        .collect();
    let mut update_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(round));
    update_rng.set_stream(u64::MAX);

    let mut writer = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("train_log.csv");
            let fresh = step == 0 || !path.exists();
            let file = OpenOptions::new().create(true).write(true).append(!fresh).truncate(fresh).open(&path)?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
            if fresh {
                w.write_record(LOG_HEADER)?;
            }
            Some(w)
        }
        None => None,
    };

    let batch = cfg.batch_steps() as u64;
    let mut window: VecDeque<EpisodeStat> = VecDeque::with_capacity(cfg.decay.window);
    let mut decay_from: Option<u64> = None;
    let mut log = Vec::new();
    let mut updates = 0usize;
    while step + batch <= total_steps {
        let (lr, eps) = match decay_from {
            Some(s0) if total_steps > s0 => {
                let p = (step - s0) as f64 / (total_steps - s0) as f64;
                (
                    linear_decay(cfg.lr, p).max(cfg.decay.lr_floor),
                    linear_decay(cfg.clip_eps, p).max(cfg.decay.eps_floor),
                )
            }
            _ => (cfg.lr, cfg.clip_eps),
        };
        let mut buffer = collect_sync(&mut workers, &learner.policy, &learner.value, learner.normalizer.as_ref(), cfg.steps_per_env)?;
        if let Some(norm) = learner.normalizer.as_mut() {
            let raw: Vec<Vec<f64>> = buffer.segments.iter().flat_map(|s| s.raw_obs.iter().cloned()).collect();
            norm.update(&raw)?;
        }
        buffer.compute_advantages(cfg.gamma, cfg.gae_tau)?;
        let stats = match ppo_update(&mut learner, &buffer, cfg, lr, eps, &mut update_rng) {
            Ok(s) => Some(s),
            Err(PpoError::NonFiniteLoss) => {
                warn!("update at step {step} produced a non-finite loss; parameters restored");
                None
            }
            Err(e) => return Err(e),
        };
        step += batch;
        updates += 1;
        for e in buffer.episodes() {
            if window.len() == cfg.decay.window.max(1) {
                window.pop_front();
            }
            window.push_back(*e);
        }
        let (mean_return, success_rate) = window_stats(&window);
        if cfg.decay.enabled
            && decay_from.is_none()
            && window.len() >= cfg.decay.window
            && success_rate >= cfg.decay.trigger_success
        {
            info!("success rate {success_rate:.2} at step {step}; starting lr/clip decay");
            decay_from = Some(step);
        }
        let nan = f64::NAN;
        let row = LogRow {
            step,
            mean_return,
            success_rate,
            policy_loss: stats.as_ref().map_or(nan, |s| s.policy_loss),
            value_loss: stats.as_ref().map_or(nan, |s| s.value_loss),
            entropy: stats.as_ref().map_or(nan, |s| s.entropy),
            lr,
            eps,
        };
        if let Some(w) = writer.as_mut() {
            w.serialize(&row)?;
            w.flush()?;
        }
        log.push(row);
        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && updates % cfg.checkpoint_every == 0 {
                learner.to_checkpoint(step).save(&dir.join(format!("checkpoint_{step}.json")))?;
            }
        }
    }
    if let Some(dir) = out_dir {
        learner.to_checkpoint(step).save(&dir.join("checkpoint.json"))?;
    }
    Ok(TrainOutcome { learner, log, step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{StepInfo, StepResult, TerminalReason};

    /// One-step episodes rewarding actions near 0.7; within 0.1 counts as
    /// reached.
    struct Bandit;

    impl EnvHandle for Bandit {
        fn obs_dim(&self) -> usize {
            1
        }
        fn act_dim(&self) -> usize {
            1
        }
        fn reset(&mut self, _seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
            Ok(vec![0.0])
        }
        fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
            let reward = -(action[0] - 0.7).powi(2);
            Ok(StepResult {
                observation: vec![0.0],
                reward,
                terminal: true,
                info: StepInfo {
                    distance: 0.0,
                    activation_norm: 0.0,
                    activation_delta: 0.0,
                    reason: Some(if reward > -0.01 { TerminalReason::Reached } else { TerminalReason::StepLimit }),
                },
            })
        }
    }

    fn bandit(_: usize) -> Result<Box<dyn EnvHandle>, EnvError> {
        Ok(Box::new(Bandit))
    }

    #[test]
    fn bandit_mean_converges() {
        for seed in 0..3 {
            let cfg = PpoConfig {
                seed,
                lr: 1e-3,
                ..Default::default()
            };
            let out = train(&bandit, &cfg, 200 * 32, None, None).unwrap();
            assert_eq!(out.log.len(), 200);
            let obs = out.learner.normalizer.as_ref().unwrap().normalize(&[0.0]);
            let mean = out.learner.policy.mean_action(&obs).unwrap()[0];
            assert!((mean - 0.7).abs() <= 0.05, "seed {seed}: mean {mean}");
        }
    }

    #[test]
    fn zero_budget_keeps_initial_policy() {
        let cfg = PpoConfig::default();
        let out = train(&bandit, &cfg, 0, None, None).unwrap();
        let fresh = Learner::new(1, 1, &cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
        assert_eq!(out.learner, fresh);
        assert!(out.log.is_empty());
    }

    #[test]
    fn log_rows_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PpoConfig {
            num_envs: 2,
            policy_hidden: vec![8],
            ..Default::default()
        };
        let out = train(&bandit, &cfg, 640, Some(dir.path()), None).unwrap();
        assert_eq!(out.log.len(), 640 / 64);
        let ck = Checkpoint::load(&dir.path().join("checkpoint.json")).unwrap();
        assert_eq!(ck.step, 640);
        let more = train(&bandit, &cfg, 1280, Some(dir.path()), Some(ck)).unwrap();
        assert_eq!(more.log.len(), 10);
        let mut rdr = csv::Reader::from_path(dir.path().join("train_log.csv")).unwrap();
        assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), LOG_HEADER.to_vec());
        let rows: Vec<LogRow> = rdr.deserialize().collect::<Result<_, _>>().unwrap();
        assert_eq!(rows.len(), 20);
        assert_eq!(rows.last().unwrap().step, 1280);
    }
}
