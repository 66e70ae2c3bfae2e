//! Track a reachable pose with the per-step excitation solver.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinectl::dynamics::{build_chain, pose_feature, quat, step, ChainConfig, ExcitationVector, MuscleMode};
use spinectl::fdat::{CostWeights, FdatSolver};

fn main() {
    let model = build_chain(&ChainConfig {
        muscle_mode: MuscleMode::Linear,
        ..ChainConfig::with_counts(2, 8)
    })
    .unwrap();
    let dt = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let hidden = ExcitationVector::new((0..model.num_muscles()).map(|_| rng.random_range(0.0..0.3)).collect()).unwrap();
    let mut s = model.rest_state();
    for _ in 0..300 {
        s = step(&model, &s, &hidden, dt).unwrap();
    }
    let target = pose_feature(&model, &s);

    let mut solver = FdatSolver::new(&model, CostWeights { delta_t: dt, ..CostWeights::default() }, dt);
    let run = solver.track(&model, &model.rest_state(), &[target.clone()], 200).unwrap();
    for (k, st) in run.states.iter().enumerate().step_by(20) {
        let err = quat::summed_angle(pose_feature(&model, st).as_slice(), target.as_slice(), 2).to_degrees();
        println!("step {k:>3}: error {err:>8.4} deg");
    }
    let mean_ms = run.solve_times.iter().sum::<f64>() / run.solve_times.len() as f64 * 1e3;
    println!("mean solve time {mean_ms:.3} ms");
}
