use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp};
use super::NnError;

pub const POLICY_HIDDEN: [usize; 4] = [32, 64, 128, 256];
pub const VALUE_HIDDEN: [usize; 2] = [64, 64];
const INITIAL_LOG_STD: f64 = -1.0;

/// Diagonal Gaussian log density, summed over dimensions.
pub fn log_prob(mean: &[f64], std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(std)
        .zip(action)
        .map(|((&m, &s), &a)| {
            let z = (a - m) / s;
            -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

/// Differential entropy of a diagonal Gaussian.
pub fn entropy(std: &[f64]) -> f64 {
    std.iter().map(|s| 0.5 * (1.0 + (2.0 * PI).ln()) + s.ln()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub log_std: DVector<f64>,
}

impl GaussianPolicy {
    fn sizes(obs_dim: usize, act_dim: usize, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(act_dim);
        sizes
    }

    /// Default architecture with orthogonal init.
    pub fn new(obs_dim: usize, act_dim: usize, rng: &mut impl Rng) -> Result<Self, NnError> {
        Self::with_hidden(obs_dim, act_dim, &POLICY_HIDDEN, rng)
    }

    pub fn with_hidden(obs_dim: usize, act_dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Result<Self, NnError> {
        let mean_net = Mlp::orthogonal(&Self::sizes(obs_dim, act_dim, hidden), 2f64.sqrt(), 0.01, rng)?;
        Ok(Self {
            mean_net,
            log_std: DVector::from_element(act_dim, INITIAL_LOG_STD),
        })
    }

    /// All weights and biases zero.
    pub fn zeros(obs_dim: usize, act_dim: usize) -> Result<Self, NnError> {
        Ok(Self {
            mean_net: Mlp::zeros(&Self::sizes(obs_dim, act_dim, &POLICY_HIDDEN), Activation::Tanh)?,
            log_std: DVector::from_element(act_dim, INITIAL_LOG_STD),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    pub fn std(&self) -> DVector<f64> {
        self.log_std.map(f64::exp)
    }

    /// Means for a batch (one observation per column) and the shared std.
    pub fn predict(&self, obs: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>), NnError> {
        Ok((self.mean_net.predict(obs)?, self.std()))
    }

    /// Like `predict`, but caches activations for `backward`.
    pub fn forward(&mut self, obs: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>), NnError> {
        Ok((self.mean_net.forward(obs)?, self.std()))
    }

    /// Gradient in the layout of [`GaussianPolicy::params`], given the
    /// gradients with respect to the batch means and to `log_std`.
    pub fn backward(&mut self, d_mean: &DMatrix<f64>, d_log_std: &DVector<f64>) -> Result<Vec<f64>, NnError> {
        if d_log_std.len() != self.act_dim() {
            return Err(NnError::DimensionMismatch {
                what: "log-std gradient",
                expected: self.act_dim(),
                got: d_log_std.len(),
            });
        }
        let mut g = self.mean_net.backward(d_mean)?;
        g.extend_from_slice(d_log_std.as_slice());
        Ok(g)
    }

    fn column(&self, obs: &[f64]) -> Result<DMatrix<f64>, NnError> {
        if obs.len() != self.obs_dim() {
            return Err(NnError::DimensionMismatch {
                what: "observation",
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        Ok(DMatrix::from_column_slice(obs.len(), 1, obs))
    }

    /// Mean action for one observation.
    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.mean_net.predict(&self.column(obs)?)?.as_slice().to_vec())
    }

    /// Sampled action and its log density.
    pub fn sample(&self, obs: &[f64], rng: &mut impl Rng) -> Result<(Vec<f64>, f64), NnError> {
        let mean = self.mean_action(obs)?;
        let std = self.std();
        let action: Vec<f64> = mean
            .iter()
            .zip(std.iter())
            .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = log_prob(&mean, std.as_slice(), &action);
        Ok((action, lp))
    }

    pub fn num_params(&self) -> usize {
        self.mean_net.num_params() + self.log_std.len()
    }

    /// Mean-network parameters followed by `log_std`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mean_net.params();
        p.extend_from_slice(self.log_std.as_slice());
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.num_params() {
            return Err(NnError::DimensionMismatch {
                what: "policy parameters",
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let n = self.mean_net.num_params();
        self.mean_net.set_params(&flat[..n])?;
        self.log_std.as_mut_slice().copy_from_slice(&flat[n..]);
        Ok(())
    }
}

/// State-value network with a scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNet {
    pub net: Mlp,
}

impl ValueNet {
    pub fn new(obs_dim: usize, rng: &mut impl Rng) -> Result<Self, NnError> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(&VALUE_HIDDEN);
        sizes.push(1);
        Ok(Self {
            net: Mlp::orthogonal(&sizes, 2f64.sqrt(), 1.0, rng)?,
        })
    }

    pub fn predict(&self, obs: &DMatrix<f64>) -> Result<DVector<f64>, NnError> {
        Ok(self.net.predict(obs)?.row(0).transpose())
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64, NnError> {
        Ok(self.predict(&DMatrix::from_column_slice(obs.len(), 1, obs))?[0])
    }

    pub fn forward(&mut self, obs: &DMatrix<f64>) -> Result<DVector<f64>, NnError> {
        Ok(self.net.forward(obs)?.row(0).transpose())
    }

    pub fn backward(&mut self, d_value: &DVector<f64>) -> Result<Vec<f64>, NnError> {
        self.net.backward(&DMatrix::from_row_slice(1, d_value.len(), d_value.as_slice()))
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params()
    }

    pub fn params(&self) -> Vec<f64> {
        self.net.params()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), NnError> {
        self.net.set_params(flat)
    }
}
