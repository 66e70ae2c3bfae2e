use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dynamics::quat::summed_angle;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation (two-pass).
pub fn mean_std(xs: &[f64]) -> MeanStd {
    if xs.is_empty() {
        return MeanStd::default();
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

/// Summed per-body geodesic angle to `target` for every sample, degrees.
pub fn sample_distances(trajectory: &[DVector<f64>], target: &DVector<f64>, num_bodies: usize) -> Vec<f64> {
    trajectory
        .iter()
        .map(|u| summed_angle(u.as_slice(), target.as_slice(), num_bodies).to_degrees())
        .collect()
}

/// Mean summed orientation error over the trajectory, degrees.
pub fn metric_correctness(trajectory: &[DVector<f64>], target: &DVector<f64>, num_bodies: usize) -> Result<f64, EvalError> {
    if trajectory.is_empty() {
        return Err(EvalError::TooFewSamples { what: "trajectory", need: 1, got: 0 });
    }
    Ok(mean_std(&sample_distances(trajectory, target, num_bodies)).mean)
}

/// Population standard deviation of the per-sample distance, degrees.
pub fn metric_stability(trajectory: &[DVector<f64>], target: &DVector<f64>, num_bodies: usize) -> Result<f64, EvalError> {
    if trajectory.len() < 2 {
        return Err(EvalError::TooFewSamples { what: "trajectory", need: 2, got: trajectory.len() });
    }
    Ok(mean_std(&sample_distances(trajectory, target, num_bodies)).std)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Norms of consecutive excitation differences.
pub fn activation_deltas(activations: &[Vec<f64>]) -> Vec<f64> {
    activations
        .windows(2)
        .map(|w| norm(&w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .collect()
}

/// Mean and std of `|a_t - a_{t-1}|`.
pub fn metric_temporal(activations: &[Vec<f64>]) -> Result<MeanStd, EvalError> {
    if activations.len() < 2 {
        return Err(EvalError::TooFewSamples { what: "activation series", need: 2, got: activations.len() });
    }
    Ok(mean_std(&activation_deltas(activations)))
}

/// Mean and std of `|a_t|`.
pub fn metric_efficiency(activations: &[Vec<f64>]) -> Result<MeanStd, EvalError> {
    if activations.is_empty() {
        return Err(EvalError::TooFewSamples { what: "activation series", need: 1, got: 0 });
    }
    Ok(mean_std(&activations.iter().map(|a| norm(a)).collect::<Vec<_>>()))
}
