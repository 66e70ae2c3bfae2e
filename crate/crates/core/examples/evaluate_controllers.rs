//! Compare the excitation solver with a briefly trained policy on the same
//! seeded targets, then time both on the default chain.
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinectl::dynamics::{build_chain, ChainConfig};
use spinectl::env::{EnvConfig, EnvError, EnvHandle, SpineEnv};
use spinectl::eval::{run_eval, timing_benchmark, Controller, TrialConfig};
use spinectl::fdat::CostWeights;
use spinectl::nn::{GaussianPolicy, POLICY_HIDDEN};
use spinectl::ppo::{train, PpoConfig};

fn main() {
    let model = Arc::new(build_chain(&ChainConfig::with_counts(1, 4)).unwrap());
    let env_cfg = EnvConfig { reach_threshold: 0.01, ..EnvConfig::default() };
    let (m, e) = (model.clone(), env_cfg.clone());
    let factory = move |_: usize| -> Result<Box<dyn EnvHandle>, EnvError> { Ok(Box::new(SpineEnv::new(m.clone(), e.clone())?)) };
    let learner = train(&factory, &PpoConfig { lr: 3e-4, num_envs: 4, ..PpoConfig::default() }, 50_000, None, None)
        .unwrap()
        .learner;

    let trials = TrialConfig { n_trials: 10, samples_per_trial: 100, seed: 5 };
    let controllers = [
        Controller::Fdat(CostWeights::default()),
        Controller::Policy { policy: learner.policy, normalizer: learner.normalizer },
    ];
    for c in &controllers {
        let r = run_eval(&trials, &model, &env_cfg, c).unwrap();
        println!(
            "{:>6}: error_c {:.3} deg, error_s {:.3} deg, error_t {:.4} +- {:.4}, error_e {:.3} +- {:.3}, {:.3} ms/step",
            r.controller,
            r.error_c,
            r.error_s,
            r.error_t.mean,
            r.error_t.std,
            r.error_e.mean,
            r.error_e.std,
            r.mean_step_time * 1e3
        );
    }

    let big = build_chain(&ChainConfig::default()).unwrap();
    let policy = GaussianPolicy::with_hidden(40, big.num_muscles(), &POLICY_HIDDEN, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let t = timing_benchmark(&big, &EnvConfig::default(), &CostWeights::default(), &policy, 100, 0).unwrap();
    println!("timing on {} muscles: {}", t.num_muscles, serde_json::to_string(&t).unwrap());
}
