//! Train a reaching policy on a one-body chain and evaluate it deterministically.
//! Pass the step budget as the first argument (default 200000).
use std::sync::Arc;

use spinectl::dynamics::{build_chain, ChainConfig};
use spinectl::env::{EnvConfig, EnvError, EnvHandle, SpineEnv, TerminalReason};
use spinectl::ppo::{train, PpoConfig};

fn main() {
    env_logger::init();
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let model = Arc::new(build_chain(&ChainConfig::with_counts(1, 4)).unwrap());
    let env_cfg = EnvConfig { reach_threshold: 0.01, ..EnvConfig::default() };
    let (m, e) = (model.clone(), env_cfg.clone());
    let factory = move |_: usize| -> Result<Box<dyn EnvHandle>, EnvError> { Ok(Box::new(SpineEnv::new(m.clone(), e.clone())?)) };
    let cfg = PpoConfig { lr: 3e-4, num_envs: 4, ..PpoConfig::default() };
    let out = train(&factory, &cfg, steps, None, None).unwrap();
    for row in out.log.iter().step_by((out.log.len() / 10).max(1)) {
        println!("step {:>7}  return {:>7.2}  success {:.2}", row.step, row.mean_return, row.success_rate);
    }

    let mut env = SpineEnv::new(model, env_cfg).unwrap();
    let mut reached = 0;
    for ep in 0..50 {
        let mut obs = env.reset(Some(1_000_000 + ep)).unwrap();
        loop {
            let o = out.learner.normalizer.as_ref().map_or(obs.clone(), |n| n.normalize(&obs));
            let r = env.step(&out.learner.policy.mean_action(&o).unwrap()).unwrap();
            obs = r.observation;
            if r.terminal {
                reached += usize::from(r.info.reason == Some(TerminalReason::Reached));
                break;
            }
        }
    }
    println!("deterministic evaluation: {reached}/50 targets reached");
}
