use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use super::loss::{clipped_loss, clipped_loss_grad};
use super::rollout::RolloutBuffer;
use super::{PpoConfig, PpoError};
use crate::nn::{entropy, AdamState, Checkpoint, GaussianPolicy, RunningNorm, ValueNet, CHECKPOINT_VERSION};

/// Policy, critic, their optimizers and the observation statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub policy: GaussianPolicy,
    pub value: ValueNet,
    pub policy_adam: AdamState,
    pub value_adam: AdamState,
    pub normalizer: Option<RunningNorm>,
}

impl Learner {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: &PpoConfig, rng: &mut impl Rng) -> Result<Self, PpoError> {
        let policy = GaussianPolicy::with_hidden(obs_dim, act_dim, &cfg.policy_hidden, rng)?;
        let value = ValueNet::new(obs_dim, rng)?;
        Ok(Self {
            policy_adam: AdamState::new(policy.num_params()),
            value_adam: AdamState::new(value.num_params()),
            normalizer: cfg.normalize_obs.then(|| RunningNorm::new(obs_dim)),
            policy,
            value,
        })
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Self {
        Self {
            policy: ck.policy,
            value: ck.value,
            policy_adam: ck.policy_adam,
            value_adam: ck.value_adam,
            normalizer: ck.normalizer,
        }
    }

    pub fn to_checkpoint(&self, step: u64) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            policy: self.policy.clone(),
            value: self.value.clone(),
            policy_adam: self.policy_adam.clone(),
            value_adam: self.value_adam.clone(),
            normalizer: self.normalizer.clone(),
            step,
        }
    }
}

/// Columns are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    pub obs: DMatrix<f64>,
    pub actions: DMatrix<f64>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyLoss {
    /// Negated objective.
    pub loss: f64,
    pub grad: Vec<f64>,
    pub entropy: f64,
    pub ratios: Vec<f64>,
}

/// Negated `mean(clipped surrogate) + c_s * entropy` and its gradient in the
/// layout of [`GaussianPolicy::params`].
pub fn policy_loss_and_grad(
    policy: &mut GaussianPolicy,
    mb: &MiniBatch,
    eps: f64,
    beta: f64,
    entropy_coef: f64,
) -> Result<PolicyLoss, PpoError> {
    let (mean, std) = policy.forward(&mb.obs)?;
    let (d, b) = mean.shape();
    let nb = b as f64;
    let var = std.map(|s| s * s);
    let mut d_mean = DMatrix::zeros(d, b);
    let mut d_log_std = DVector::zeros(d);
    let mut surrogate = 0.0;
    let mut ratios = Vec::with_capacity(b);
    for i in 0..b {
        let act = mb.actions.column(i);
        let mu = mean.column(i);
        let logp = crate::nn::log_prob(mu.as_slice(), std.as_slice(), act.as_slice());
        let r = (logp - mb.old_log_probs[i]).exp();
        let adv = mb.advantages[i];
        surrogate += clipped_loss(r, adv, eps, beta);
        // d objective_i / d logp_i
        let g = clipped_loss_grad(r, adv, eps, beta) * r;
        for k in 0..d {
            let diff = act[k] - mu[k];
            d_mean[(k, i)] = -g * diff / var[k] / nb;
            d_log_std[k] -= g * (diff * diff / var[k] - 1.0) / nb;
        }
        ratios.push(r);
    }
    d_log_std.add_scalar_mut(-entropy_coef);
    let ent = entropy(std.as_slice());
    let loss = -(surrogate / nb + entropy_coef * ent);
    let grad = policy.backward(&d_mean, &d_log_std)?;
    Ok(PolicyLoss { loss, grad, entropy: ent, ratios })
}

/// `c_v * mean((V(s) - return)^2)` and its gradient.
pub fn value_loss_and_grad(value: &mut ValueNet, obs: &DMatrix<f64>, returns: &[f64], value_coef: f64) -> Result<(f64, Vec<f64>), PpoError> {
    let v = value.forward(obs)?;
    if returns.len() != v.len() {
        return Err(PpoError::LengthMismatch {
            what: "returns",
            expected: v.len(),
            got: returns.len(),
        });
    }
    let n = v.len() as f64;
    let resid = DVector::from_iterator(v.len(), v.iter().zip(returns).map(|(a, b)| a - b));
    let loss = value_coef * resid.norm_squared() / n;
    let grad = value.backward(&(resid * (2.0 * value_coef / n)))?;
    Ok((loss, grad))
}

/// Shift and scale to zero mean and unit population variance.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    for a in adv.iter_mut() {
        *a -= mean;
        if std > 1e-12 {
            *a /= std;
        }
    }
}

fn clip_norm(g: &mut [f64], max: Option<f64>) {
    if let Some(max) = max {
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > max {
            let s = max / norm;
            g.iter_mut().for_each(|v| *v *= s);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Largest `|r - 1|` on the first minibatch of the first epoch.
    pub first_ratio_deviation: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
    pub stopped_early: bool,
}

fn gather(cols: &[&Vec<f64>], idx: &[usize]) -> DMatrix<f64> {
    let rows = cols.first().map_or(0, |c| c.len());
    DMatrix::from_fn(rows, idx.len(), |r, c| cols[idx[c]][r])
}

/// Several epochs of minibatch Adam steps on the policy surrogate and the
/// value regression. A non-finite loss rolls both networks back.
pub fn ppo_update(
    learner: &mut Learner,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    lr: f64,
    eps: f64,
    rng: &mut impl Rng,
) -> Result<UpdateStats, PpoError> {
    let n = buffer.len();
    if buffer.advantages.len() != n {
        return Err(PpoError::LengthMismatch {
            what: "advantages",
            expected: n,
            got: buffer.advantages.len(),
        });
    }
    let obs: Vec<&Vec<f64>> = buffer.obs().collect();
    let actions: Vec<&Vec<f64>> = buffer.actions().collect();
    let old: Vec<f64> = buffer.log_probs().collect();
    let mut adv = buffer.advantages.clone();
    normalize_advantages(&mut adv);

    let snapshot = learner.clone();
    let mut stats = UpdateStats::default();
    let mut clipped = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    let result = (|| -> Result<(), PpoError> {
        for epoch in 0..cfg.epochs {
            order.shuffle(rng);
            for (k, idx) in order.chunks(cfg.minibatch_size).enumerate() {
                let mb = MiniBatch {
                    obs: gather(&obs, idx),
                    actions: gather(&actions, idx),
                    old_log_probs: idx.iter().map(|&i| old[i]).collect(),
                    advantages: idx.iter().map(|&i| adv[i]).collect(),
                    returns: idx.iter().map(|&i| buffer.returns[i]).collect(),
                };
                let mut pl = policy_loss_and_grad(&mut learner.policy, &mb, eps, cfg.stab_beta, cfg.entropy_coef)?;
                let (vl, mut vg) = value_loss_and_grad(&mut learner.value, &mb.obs, &mb.returns, cfg.value_coef)?;
                if !pl.loss.is_finite() || !vl.is_finite() || pl.grad.iter().chain(&vg).any(|g| !g.is_finite()) {
                    return Err(PpoError::NonFiniteLoss);
                }
                if epoch == 0 && k == 0 {
                    stats.first_ratio_deviation = pl.ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
                }
                if let Some(target) = cfg.target_kl {
                    let kl = pl.ratios.iter().map(|r| (r - 1.0) - r.ln()).sum::<f64>() / pl.ratios.len() as f64;
                    if kl > 1.5 * target {
                        stats.stopped_early = true;
                        return Ok(());
                    }
                }
                clipped += pl.ratios.iter().filter(|r| (*r - 1.0).abs() > eps).count();
                clip_norm(&mut pl.grad, cfg.max_grad_norm);
                clip_norm(&mut vg, cfg.max_grad_norm);
                let mut p = learner.policy.params();
                learner.policy_adam.step(&mut p, &pl.grad, lr)?;
                learner.policy.set_params(&p)?;
                let (lo, hi) = cfg.log_std_bounds;
                learner.policy.log_std.apply(|v| *v = v.clamp(lo, hi));
                let mut p = learner.value.params();
                learner.value_adam.step(&mut p, &vg, lr)?;
                learner.value.set_params(&p)?;
                stats.policy_loss += pl.loss;
                stats.value_loss += vl;
                stats.entropy += pl.entropy;
                stats.minibatches += 1;
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        *learner = snapshot;
        return Err(e);
    }
    let m = stats.minibatches.max(1) as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.clip_fraction = clipped as f64 / (m * cfg.minibatch_size as f64);
    Ok(stats)
}
