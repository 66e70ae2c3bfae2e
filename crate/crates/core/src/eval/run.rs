use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{activation_deltas, mean_std, sample_distances, MeanStd};
use super::EvalError;
use crate::dynamics::{pose_feature, step, ChainModel, ExcitationVector, ModelState, PoseFeature};
use crate::env::{observation, sample_target, EnvConfig, TargetDomain, TargetSpec};
use crate::fdat::{CostWeights, FdatSolver};
use crate::nn::{Checkpoint, GaussianPolicy, RunningNorm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub n_trials: usize,
    pub samples_per_trial: usize,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self { n_trials: 60, samples_per_trial: 100, seed: 0 }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.n_trials == 0 || self.samples_per_trial == 0 {
            return Err(EvalError::Config("trials and samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Fdat(CostWeights),
    /// Deterministic: the action is the Gaussian mean.
    Policy {
        policy: GaussianPolicy,
        normalizer: Option<RunningNorm>,
    },
}

impl Controller {
    pub fn from_checkpoint(ck: Checkpoint) -> Self {
        Controller::Policy { policy: ck.policy, normalizer: ck.normalizer }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Controller::Fdat(_) => "fdat",
            Controller::Policy { .. } => "policy",
        }
    }

    fn check(&self, model: &ChainModel, env: &EnvConfig) -> Result<(), EvalError> {
        match self {
            Controller::Fdat(w) => {
                w.validate()?;
                if model.pose_feature != PoseFeature::Orientations {
                    return Err(EvalError::Config("tracking targets are orientation-only".into()));
                }
            }
            Controller::Policy { policy, normalizer } => {
                let obs = 4 * model.num_bodies() * if env.include_target { 2 } else { 1 };
                if policy.obs_dim() != obs || policy.act_dim() != model.num_muscles() {
                    return Err(EvalError::ModelMismatch(format!(
                        "policy is {}->{}, model needs {}->{}",
                        policy.obs_dim(),
                        policy.act_dim(),
                        obs,
                        model.num_muscles()
                    )));
                }
                if normalizer.as_ref().is_some_and(|n| n.dim() != obs) {
                    return Err(EvalError::ModelMismatch("normalizer width differs from observation".into()));
                }
            }
        }
        Ok(())
    }
}

/// Per-trial state of a controller.
enum Runner<'a> {
    Fdat(FdatSolver),
    Policy(&'a GaussianPolicy, Option<&'a RunningNorm>),
}

impl<'a> Runner<'a> {
    fn new(c: &'a Controller, model: &ChainModel, dt: f64) -> Self {
        match c {
            Controller::Fdat(w) => Runner::Fdat(FdatSolver::new(model, w.clone(), dt)),
            Controller::Policy { policy, normalizer } => Runner::Policy(policy, normalizer.as_ref()),
        }
    }

    fn act(&mut self, model: &ChainModel, state: &ModelState, target: &DVector<f64>, include_target: bool) -> Result<ExcitationVector, EvalError> {
        match self {
            Runner::Fdat(s) => Ok(s.act(model, state, target)?.a),
            Runner::Policy(p, norm) => {
                let obs = observation(model, state, target, include_target);
                let obs = match norm {
                    Some(n) => n.normalize(&obs),
                    None => obs,
                };
                Ok(ExcitationVector::clipped(&p.mean_action(&obs)?))
            }
        }
    }
}

/// Targets depend only on the seed, so every controller faces the same ones.
pub fn trial_targets(cfg: &TrialConfig, num_bodies: usize, domain: &TargetDomain) -> Vec<TargetSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_trials).map(|_| sample_target(&mut rng, num_bodies, domain)).collect()
}

/// Raw record of one closed-loop trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// Pose feature after each step.
    pub trajectory: Vec<DVector<f64>>,
    pub activations: Vec<Vec<f64>>,
    /// Seconds spent choosing each action.
    pub step_times: Vec<f64>,
}

/// Run `controller` from rest toward `target` for `samples` steps.
pub fn run_trial(
    model: &ChainModel,
    env: &EnvConfig,
    controller: &Controller,
    target: &TargetSpec,
    samples: usize,
) -> Result<TrialRecord, EvalError> {
    controller.check(model, env)?;
    let goal = target.feature();
    let mut runner = Runner::new(controller, model, env.dt);
    let mut state = model.rest_state();
    let mut rec = TrialRecord {
        trajectory: Vec::with_capacity(samples),
        activations: Vec::with_capacity(samples),
        step_times: Vec::with_capacity(samples),
    };
    for _ in 0..samples {
        let t0 = Instant::now();
        let a = runner.act(model, &state, &goal, env.include_target)?;
        rec.step_times.push(t0.elapsed().as_secs_f64());
        state = step(model, &state, &a, env.dt)?;
        rec.trajectory.push(pose_feature(model, &state));
        rec.activations.push(a.into_inner());
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialMetrics {
    pub trial: usize,
    pub error_c: f64,
    pub error_s: f64,
    pub error_t: MeanStd,
    pub error_e: MeanStd,
    pub mean_step_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    pub controller: String,
    pub num_muscles: usize,
    pub samples_per_trial: usize,
    pub seed: u64,
    /// Mean summed orientation error over all samples, degrees.
    pub error_c: f64,
    /// Mean over trials of the within-trial distance std, degrees.
    pub error_s: f64,
    /// Pooled over all consecutive pairs of every trial.
    pub error_t: MeanStd,
    /// Pooled over all samples of every trial.
    pub error_e: MeanStd,
    pub mean_step_time: f64,
    pub trials: Vec<TrialMetrics>,
}

/// Fixed CSV header shared by per-trial rows and the trailing summary row.
pub const REPORT_HEADER: [&str; 10] = [
    "trial",
    "controller",
    "errorC",
    "errorS",
    "errorTMean",
    "errorTStd",
    "errorEMean",
    "errorEStd",
    "meanStepTime",
    "numMuscles",
];

fn row(trial: &str, controller: &str, c: f64, s: f64, t: MeanStd, e: MeanStd, time: f64, m: usize) -> Vec<String> {
    let mut r = vec![trial.to_string(), controller.to_string()];
    r.extend([c, s, t.mean, t.std, e.mean, e.std, time].iter().map(|v| v.to_string()));
    r.push(m.to_string());
    r
}

impl MetricsReport {
    pub fn write_csv(&self, out: impl Write) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_HEADER)?;
        for t in &self.trials {
            w.write_record(row(&t.trial.to_string(), &self.controller, t.error_c, t.error_s, t.error_t, t.error_e, t.mean_step_time, self.num_muscles))?;
        }
        w.write_record(row("summary", &self.controller, self.error_c, self.error_s, self.error_t, self.error_e, self.mean_step_time, self.num_muscles))?;
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), EvalError> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Evaluate `controller` on `cfg.n_trials` seeded targets.
pub fn run_eval(cfg: &TrialConfig, model: &ChainModel, env: &EnvConfig, controller: &Controller) -> Result<MetricsReport, EvalError> {
    cfg.validate()?;
    controller.check(model, env)?;
    let n = model.num_bodies();
    let mut trials = Vec::with_capacity(cfg.n_trials);
    let (mut all_d, mut all_dt, mut all_e, mut all_time) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut stds = Vec::new();
    for (k, target) in trial_targets(cfg, n, &env.target_domain).iter().enumerate() {
        let rec = run_trial(model, env, controller, target, cfg.samples_per_trial)?;
        let d = sample_distances(&rec.trajectory, &target.feature(), n);
        let deltas = activation_deltas(&rec.activations);
        let norms: Vec<f64> = rec.activations.iter().map(|a| a.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        let ds = mean_std(&d);
        let m = TrialMetrics {
            trial: k,
            error_c: ds.mean,
            error_s: ds.std,
            error_t: mean_std(&deltas),
            error_e: mean_std(&norms),
            mean_step_time: mean_std(&rec.step_times).mean,
        };
        stds.push(ds.std);
        all_d.extend(d);
        all_dt.extend(deltas);
        all_e.extend(norms);
        all_time.extend(rec.step_times);
        trials.push(m);
    }
    let report = MetricsReport {
        controller: controller.name().into(),
        num_muscles: model.num_muscles(),
        samples_per_trial: cfg.samples_per_trial,
        seed: cfg.seed,
        error_c: mean_std(&all_d).mean,
        error_s: mean_std(&stds).mean,
        error_t: mean_std(&all_dt),
        error_e: mean_std(&all_e),
        mean_step_time: mean_std(&all_time).mean,
        trials,
    };
    if !report.error_c.is_finite() || !report.error_e.mean.is_finite() {
        return Err(EvalError::NonFinite);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimingReport {
    pub fdat_step_time: f64,
    pub policy_step_time: f64,
    /// fdat / policy.
    pub ratio: f64,
    pub n_steps: usize,
    pub num_muscles: usize,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

const WARMUP: usize = 3;

/// Median per-step action time of both controllers along one FDAT-driven
/// trajectory toward a seeded target.
pub fn timing_benchmark(
    model: &ChainModel,
    env: &EnvConfig,
    weights: &CostWeights,
    policy: &GaussianPolicy,
    n_steps: usize,
    seed: u64,
) -> Result<TimingReport, EvalError> {
    if n_steps == 0 {
        return Err(EvalError::Config("benchmark needs at least one step".into()));
    }
    let fdat = Controller::Fdat(weights.clone());
    let pol = Controller::Policy { policy: policy.clone(), normalizer: None };
    fdat.check(model, env)?;
    pol.check(model, env)?;
    let target = trial_targets(&TrialConfig { n_trials: 1, samples_per_trial: 1, seed }, model.num_bodies(), &env.target_domain)
        .remove(0)
        .feature();
    let mut f = Runner::new(&fdat, model, env.dt);
    let mut p = Runner::new(&pol, model, env.dt);
    let mut state = model.rest_state();
    let (mut tf, mut tp) = (Vec::with_capacity(n_steps), Vec::with_capacity(n_steps));
    for k in 0..n_steps + WARMUP {
        let t0 = Instant::now();
        let a = f.act(model, &state, &target, env.include_target)?;
        let t1 = Instant::now();
        std::hint::black_box(p.act(model, &state, &target, env.include_target)?);
        let t2 = Instant::now();
        if k >= WARMUP {
            tf.push((t1 - t0).as_secs_f64());
            tp.push((t2 - t1).as_secs_f64());
        }
        state = step(model, &state, &a, env.dt)?;
    }
    let (fdat_step_time, policy_step_time) = (median(tf), median(tp));
    Ok(TimingReport {
        fdat_step_time,
        policy_step_time,
        ratio: fdat_step_time / policy_step_time,
        n_steps,
        num_muscles: model.num_muscles(),
    })
}
