//! Release a perturbed chain with no excitation and watch it settle.
use nalgebra::{UnitQuaternion, Vector3};
use spinectl::dynamics::{build_chain, kinetic_energy, potential_energy, step, ChainConfig, ExcitationVector};

fn main() {
    let model = build_chain(&ChainConfig::default()).expect("default chain");
    let mut state = model.rest_state();
    for (i, pose) in state.poses.iter_mut().enumerate() {
        pose.rotation = UnitQuaternion::from_scaled_axis(Vector3::new(0.02 * (i + 1) as f64, -0.01, 0.0));
    }
    let zeros = ExcitationVector::zeros(model.num_muscles());
    println!("{} bodies, {} muscles", model.num_bodies(), model.num_muscles());
    for k in 0..=300 {
        if k % 30 == 0 {
            let e = kinetic_energy(&model, &state) + potential_energy(&model, &state).unwrap();
            let tilt = state.poses.last().unwrap().rotation.angle().to_degrees();
            println!("t = {:.2} s  energy {e:>12.6} J  top tilt {tilt:.3} deg", state.time);
        }
        state = step(&model, &state, &zeros, 0.01).unwrap();
    }
}
