//! Serve the environment over HTTP and drive it through the blocking client.
use std::sync::Arc;

use spinectl::dynamics::{build_chain, ChainConfig};
use spinectl::env::{EnvConfig, EnvHandle};
use spinectl::service::{spawn_background, RemoteEnv, ServiceConfig};

fn main() {
    let model = Arc::new(build_chain(&ChainConfig::default()).unwrap());
    let svc = spawn_background(
        model.clone(),
        EnvConfig::default(),
        ServiceConfig {
            bind: ([127, 0, 0, 1], 0).into(),
            ..ServiceConfig::default()
        },
    )
    .unwrap();
    println!("serving on {}", svc.base_url());
    let (mut env, obs) = RemoteEnv::connect(&svc.base_url(), 1).unwrap();
    println!("session {} spec {:?}, first observation has {} entries", env.session_id(), env.spec(), obs.len());
    let action = vec![0.1; model.num_muscles()];
    for k in 0..5 {
        let r = env.step(&action).unwrap();
        println!("step {k}: reward {:.4}, distance {:.4}, terminal {}", r.reward, r.info.distance, r.terminal);
    }
    drop(env);
    svc.shutdown().unwrap();
}
