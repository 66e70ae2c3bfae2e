use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gae::compute_gae;
use super::PpoError;
use crate::env::{EnvError, EnvHandle, StepResult, TerminalReason};
use crate::nn::{GaussianPolicy, RunningNorm, ValueNet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStat {
    pub total_reward: f64,
    pub length: usize,
    pub reached: bool,
}

/// One environment plus the bookkeeping that persists between collections.
pub struct Worker {
    pub env: Box<dyn EnvHandle>,
    rng: ChaCha8Rng,
    reset_seed: Option<u64>,
    obs: Option<Vec<f64>>,
    episode_reward: f64,
    episode_len: usize,
}

impl Worker {
    /// `reset_seed` seeds the first episode; `sampler_seed` and `stream`
    /// drive the action noise.
    pub fn new(env: Box<dyn EnvHandle>, reset_seed: u64, sampler_seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(sampler_seed);
        rng.set_stream(stream);
        Self {
            env,
            rng,
            reset_seed: Some(reset_seed),
            obs: None,
            episode_reward: 0.0,
            episode_len: 0,
        }
    }

    fn retry<T>(&mut self, mut f: impl FnMut(&mut dyn EnvHandle) -> Result<T, EnvError>) -> Result<T, EnvError> {
        match f(self.env.as_mut()) {
            Ok(v) => Ok(v),
            Err(first) => {
                warn!("environment call failed ({first}); retrying once");
                f(self.env.as_mut())
            }
        }
    }

    fn current_obs(&mut self) -> Result<Vec<f64>, EnvError> {
        if let Some(o) = &self.obs {
            return Ok(o.clone());
        }
        let seed = self.reset_seed.take();
        let o = self.retry(|e| e.reset(seed))?;
        self.episode_reward = 0.0;
        self.episode_len = 0;
        self.obs = Some(o.clone());
        Ok(o)
    }

    fn collect(
        &mut self,
        policy: &GaussianPolicy,
        value: &ValueNet,
        norm: Option<&RunningNorm>,
        steps: usize,
    ) -> Result<Segment, PpoError> {
        let prep = |o: &[f64]| norm.map_or_else(|| o.to_vec(), |n| n.normalize(o));
        let mut seg = Segment::default();
        for _ in 0..steps {
            let raw = self.current_obs()?;
            let obs = prep(&raw);
            let (action, logp) = policy.sample(&obs, &mut self.rng)?;
            let v = value.value(&obs)?;
            let res: StepResult = self.retry(|e| e.step(&action))?;
            self.episode_reward += res.reward;
            self.episode_len += 1;
            seg.raw_obs.push(raw);
            seg.obs.push(obs);
            seg.actions.push(action);
            seg.log_probs.push(logp);
            seg.values.push(v);
            seg.rewards.push(res.reward);
            seg.dones.push(res.terminal);
            if res.terminal {
                seg.episodes.push(EpisodeStat {
                    total_reward: self.episode_reward,
                    length: self.episode_len,
                    reached: res.info.reason == Some(TerminalReason::Reached),
                });
                self.obs = None;
            } else {
                self.obs = Some(res.observation);
            }
        }
        seg.bootstrap = match &self.obs {
            Some(o) if !seg.dones.last().copied().unwrap_or(true) => value.value(&prep(o))?,
            _ => 0.0,
        };
        Ok(seg)
    }
}

/// Consecutive transitions from one environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segment {
    /// Observations as fed to the networks.
    pub obs: Vec<Vec<f64>>,
    pub raw_obs: Vec<Vec<f64>>,
    /// Pre-clip sampled actions.
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap: f64,
    pub episodes: Vec<EpisodeStat>,
}

/// Transitions ordered by (env, step) with their advantages and returns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub segments: Vec<Segment>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.rewards.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn obs(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.segments.iter().flat_map(|s| s.obs.iter())
    }

    pub fn actions(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.segments.iter().flat_map(|s| s.actions.iter())
    }

    pub fn log_probs(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().flat_map(|s| s.log_probs.iter().copied())
    }

    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeStat> {
        self.segments.iter().flat_map(|s| s.episodes.iter())
    }

    pub fn compute_advantages(&mut self, gamma: f64, tau: f64) -> Result<(), PpoError> {
        self.advantages.clear();
        self.returns.clear();
        for s in &self.segments {
            let (a, r) = compute_gae(&s.rewards, &s.values, &s.dones, s.bootstrap, gamma, tau)?;
            self.advantages.extend(a);
            self.returns.extend(r);
        }
        Ok(())
    }
}

/// Step every worker `steps` times in parallel with the current policy and
/// merge the results in worker order. A worker whose environment fails
/// twice in a row contributes nothing this round.
pub fn collect_sync(
    workers: &mut [Worker],
    policy: &GaussianPolicy,
    value: &ValueNet,
    norm: Option<&RunningNorm>,
    steps: usize,
) -> Result<RolloutBuffer, PpoError> {
    let results: Vec<Result<Segment, PpoError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = workers
            .iter_mut()
            .map(|w| scope.spawn(move || w.collect(policy, value, norm, steps)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rollout worker panicked"))
            .collect()
    });
    let mut buffer = RolloutBuffer::default();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(seg) => buffer.segments.push(seg),
            Err(e) => {
                warn!("dropping rollout of environment {i}: {e}");
                workers[i].obs = None;
            }
        }
    }
    if buffer.segments.is_empty() {
        return Err(PpoError::NoRollouts);
    }
    Ok(buffer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_chain, ChainConfig};
    use crate::env::{EnvConfig, SpineEnv, StepInfo};
    use std::sync::Arc;

    fn nets(obs: usize, act: usize) -> (GaussianPolicy, ValueNet) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        (
            GaussianPolicy::with_hidden(obs, act, &[16, 16], &mut rng).unwrap(),
            ValueNet::new(obs, &mut rng).unwrap(),
        )
    }

    fn spine_workers(n: usize) -> Vec<Worker> {
        let model = Arc::new(build_chain(&ChainConfig::with_counts(1, 4)).unwrap());
        (0..n)
            .map(|i| {
                let env = SpineEnv::new(model.clone(), EnvConfig::default()).unwrap();
                Worker::new(Box::new(env), 100 + i as u64, 7, i as u64)
            })
            .collect()
    }

    #[test]
    fn parallel_matches_serial() {
        let (p, v) = nets(8, 4);
        let mut par = spine_workers(4);
        let buf = collect_sync(&mut par, &p, &v, None, 32).unwrap();
        assert_eq!(buf.len(), 128);
        let mut serial = spine_workers(4);
        for (i, w) in serial.iter_mut().enumerate() {
            let seg = w.collect(&p, &v, None, 32).unwrap();
            assert_eq!(seg, buf.segments[i]);
        }
        let single = collect_sync(&mut spine_workers(1), &p, &v, None, 32).unwrap();
        assert_eq!(single.len(), 32);
    }

    #[test]
    fn near_deterministic_collections_repeat() {
        let (mut p, v) = nets(8, 4);
        p.log_std.fill(-30.0);
        let a = collect_sync(&mut spine_workers(2), &p, &v, None, 40).unwrap();
        let b = collect_sync(&mut spine_workers(2), &p, &v, None, 40).unwrap();
        assert_eq!(a, b);
        assert!(a.episodes().count() >= 2);
    }

    struct Flaky {
        calls: usize,
        fail_every: usize,
        always: bool,
    }

    impl EnvHandle for Flaky {
        fn obs_dim(&self) -> usize {
            1
        }
        fn act_dim(&self) -> usize {
            1
        }
        fn reset(&mut self, _seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
            Ok(vec![0.0])
        }
        fn step(&mut self, _action: &[f64]) -> Result<StepResult, EnvError> {
            self.calls += 1;
            if self.always || self.calls % self.fail_every == 0 {
                return Err(EnvError::Remote("connection reset".into()));
            }
            Ok(StepResult {
                observation: vec![0.0],
                reward: 1.0,
                terminal: false,
                info: StepInfo {
                    distance: 1.0,
                    activation_norm: 0.0,
                    activation_delta: 0.0,
                    reason: None,
                },
            })
        }
    }

    #[test]
    fn failures_retry_once_then_drop() {
        let (p, v) = nets(1, 1);
        let mut workers = vec![
            Worker::new(Box::new(Flaky { calls: 0, fail_every: 3, always: false }), 0, 0, 0),
            Worker::new(Box::new(Flaky { calls: 0, fail_every: 1, always: true }), 0, 0, 1),
        ];
        let buf = collect_sync(&mut workers, &p, &v, None, 10).unwrap();
        assert_eq!(buf.segments.len(), 1);
        assert_eq!(buf.len(), 10);
        let mut dead = vec![Worker::new(Box::new(Flaky { calls: 0, fail_every: 1, always: true }), 0, 0, 0)];
        assert!(matches!(collect_sync(&mut dead, &p, &v, None, 4), Err(PpoError::NoRollouts)));
    }
}
