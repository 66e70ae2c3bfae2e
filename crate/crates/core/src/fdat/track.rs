use std::time::Instant;

use log::warn;
use nalgebra::DVector;

use super::lcp::{lcp_ppm, PpmOptions};
use super::qp::{assemble_qp, qp_to_lcp, CostWeights};
use super::FdatError;
use crate::dynamics::{sensitivity, step, ChainModel, ExcitationVector, ModelState};

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSolution {
    pub a: ExcitationVector,
    /// Weighted cost at `a` under the affine model.
    pub objective: f64,
    pub pivots: usize,
    /// False when the solver failed and `a` is the clamped previous excitation.
    pub converged: bool,
}

/// Flip each body's quaternion block of `target` into the hemisphere of the
/// matching block of `reference`. Position entries are left alone.
pub fn align_target(reference: &DVector<f64>, target: &DVector<f64>, num_bodies: usize) -> DVector<f64> {
    let mut out = target.clone();
    for b in 0..num_bodies {
        let r = reference.rows(4 * b, 4);
        if r.dot(&target.rows(4 * b, 4)) < 0.0 {
            out.rows_mut(4 * b, 4).neg_mut();
        }
    }
    out
}

/// One inverse-tracking step: probe the sensitivity at `state`, assemble the
/// box QP toward `target` (a pose-feature vector) and solve it by pivoting.
pub fn solve_fdat_step(
    model: &ChainModel,
    state: &ModelState,
    target: &DVector<f64>,
    a_prev: &[f64],
    weights: &CostWeights,
    dt: f64,
) -> Result<ActivationSolution, FdatError> {
    let m = model.num_muscles();
    if a_prev.len() != m {
        return Err(FdatError::DimensionMismatch { what: "a_prev", expected: m, got: a_prev.len() });
    }
    if target.len() != model.feature_dim() {
        return Err(FdatError::DimensionMismatch { what: "target", expected: model.feature_dim(), got: target.len() });
    }
    let sens = sensitivity(model, state, dt)?;
    let target = align_target(&sens.u0, target, model.num_bodies());
    let qp = assemble_qp(&sens.lambda, &sens.u0, &target, a_prev, weights)?;
    let (lcp, recovery) = qp_to_lcp(&qp)?;
    let (a, pivots, converged) = match lcp_ppm(&lcp, &PpmOptions::for_dim(lcp.dim())) {
        Ok(sol) => (ExcitationVector::clipped(recovery.recover(&sol.z).as_slice()), sol.pivots, true),
        Err(e @ (FdatError::PivotLimit { .. } | FdatError::Degenerate { .. } | FdatError::Infeasible | FdatError::Certificate { .. })) => {
            warn!("pivoting failed ({e}); holding previous excitation");
            (ExcitationVector::clipped(a_prev), 0, false)
        }
        Err(e) => return Err(e),
    };
    let objective = weights.total(&sens.predict(&a), &target, &a, a_prev);
    Ok(ActivationSolution { a, objective, pivots, converged })
}

/// Record of a closed-loop tracking run.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracking {
    /// Initial state followed by one state per step.
    pub states: Vec<ModelState>,
    pub activations: Vec<ExcitationVector>,
    /// Wall-clock seconds spent in each solve.
    pub solve_times: Vec<f64>,
}

/// Stateful tracking controller that remembers the previous excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct FdatSolver {
    pub weights: CostWeights,
    pub dt: f64,
    pub a_prev: Vec<f64>,
}

impl FdatSolver {
    pub fn new(model: &ChainModel, weights: CostWeights, dt: f64) -> Self {
        Self {
            weights,
            dt,
            a_prev: vec![0.0; model.num_muscles()],
        }
    }

    pub fn reset(&mut self) {
        self.a_prev.iter_mut().for_each(|a| *a = 0.0);
    }

    pub fn act(&mut self, model: &ChainModel, state: &ModelState, target: &DVector<f64>) -> Result<ActivationSolution, FdatError> {
        let sol = solve_fdat_step(model, state, target, &self.a_prev, &self.weights, self.dt)?;
        self.a_prev.copy_from_slice(&sol.a);
        Ok(sol)
    }

    /// Alternate solves and dynamics steps. Step `k` tracks `schedule[k]`,
    /// holding the last entry once the schedule runs out.
    pub fn track(
        &mut self,
        model: &ChainModel,
        initial: &ModelState,
        schedule: &[DVector<f64>],
        n_steps: usize,
    ) -> Result<Tracking, FdatError> {
        if n_steps == 0 {
            return Err(FdatError::NoSteps);
        }
        if schedule.is_empty() {
            return Err(FdatError::DimensionMismatch { what: "target schedule", expected: 1, got: 0 });
        }
        let mut out = Tracking {
            states: vec![initial.clone()],
            activations: Vec::with_capacity(n_steps),
            solve_times: Vec::with_capacity(n_steps),
        };
        let mut state = initial.clone();
        for k in 0..n_steps {
            let target = &schedule[k.min(schedule.len() - 1)];
            let t0 = Instant::now();
            let sol = self.act(model, &state, target)?;
            out.solve_times.push(t0.elapsed().as_secs_f64());
            state = step(model, &state, &sol.a, self.dt)?;
            out.states.push(state.clone());
            out.activations.push(sol.a);
        }
        Ok(out)
    }
}

pub fn track_trajectory(
    model: &ChainModel,
    initial: &ModelState,
    schedule: &[DVector<f64>],
    weights: &CostWeights,
    n_steps: usize,
    dt: f64,
) -> Result<Tracking, FdatError> {
    FdatSolver::new(model, *weights, dt).track(model, initial, schedule, n_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::quat::summed_angle;
    use crate::dynamics::{build_chain, pose_feature, ChainConfig, MuscleMode, MuscleSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const DT: f64 = 0.01;

    fn quiet(n: usize, m: usize) -> ChainModel {
        build_chain(&ChainConfig {
            gravity: [0.0; 3],
            head_load: 0.0,
            ..ChainConfig::with_counts(n, m)
        })
        .unwrap()
    }

    fn linear_chain() -> ChainModel {
        build_chain(&ChainConfig {
            muscle_mode: MuscleMode::Linear,
            ..ChainConfig::with_counts(2, 8)
        })
        .unwrap()
    }

    fn settle(model: &ChainModel, a: &[f64], steps: usize) -> ModelState {
        let a = ExcitationVector::new(a.to_vec()).unwrap();
        let mut s = model.rest_state();
        for _ in 0..steps {
            s = step(model, &s, &a, DT).unwrap();
        }
        s
    }

    #[test]
    fn at_target_gives_zero_excitation() {
        let model = quiet(2, 8);
        let rest = model.rest_state();
        let target = crate::dynamics::pose_feature(&model, &rest);
        let sol = solve_fdat_step(&model, &rest, &target, &[0.0; 16], &CostWeights::default(), DT).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.pivots, 0);
        assert!(sol.a.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn single_muscle_matches_line_search() {
        let model = build_chain(&ChainConfig {
            muscles_per_level: 0,
            extra_muscles: vec![MuscleSpec {
                origin_body: None,
                insertion_body: Some(0),
                origin_point: [0.06, 0.0, -0.05],
                insertion_point: [0.06, 0.0, 0.0],
                max_iso_force: 1000.0,
                opt_fiber_length: None,
                tendon_ratio: 0.2,
                pennation_deg: 0.0,
                mode: MuscleMode::Hill,
            }],
            ..ChainConfig::with_counts(1, 0)
        })
        .unwrap();
        let rest = model.rest_state();
        let target = pose_feature(&model, &settle(&model, &[0.5], 1));
        let w = CostWeights::default();
        let sol = solve_fdat_step(&model, &rest, &target, &[0.0], &w, DT).unwrap();
        assert!(sol.a[0] > 0.0);

        let sens = sensitivity(&model, &rest, DT).unwrap();
        let cost = |a: f64| w.total(&sens.predict(&[a]), &target, &[a], &[0.0]);
        let (mut lo, mut hi) = (0.0, 1.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let (x1, x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
            if cost(x1) < cost(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        assert!((sol.a[0] - 0.5 * (lo + hi)).abs() < 1e-6, "{} vs {}", sol.a[0], 0.5 * (lo + hi));
    }

    #[test]
    fn solution_never_worse_than_previous_excitation() {
        let model = build_chain(&ChainConfig::with_counts(2, 8)).unwrap();
        let m = model.num_muscles();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = CostWeights::default();
        for _ in 0..50 {
            let drive: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..0.4)).collect();
            let state = settle(&model, &drive, rng.random_range(1..20));
            let goal: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..0.4)).collect();
            let target = pose_feature(&model, &settle(&model, &goal, 30));
            let prev: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
            let sol = solve_fdat_step(&model, &state, &target, &prev, &w, DT).unwrap();
            assert!(sol.converged);
            assert!(sol.a.iter().all(|a| (0.0..=1.0).contains(a)));
            let sens = sensitivity(&model, &state, DT).unwrap();
            let aligned = align_target(&sens.u0, &target, model.num_bodies());
            let at_prev = w.total(&sens.predict(&prev), &aligned, &prev, &prev);
            assert!(sol.objective <= at_prev + 1e-12, "{} > {at_prev}", sol.objective);
        }
    }

    #[test]
    fn stronger_regularization_never_grows_excitation() {
        let model = build_chain(&ChainConfig::with_counts(2, 8)).unwrap();
        let m = model.num_muscles();
        let state = settle(&model, &vec![0.1; m], 5);
        let goal: Vec<f64> = (0..m).map(|j| if j % 3 == 0 { 0.5 } else { 0.05 }).collect();
        let target = pose_feature(&model, &settle(&model, &goal, 40));
        let prev = vec![0.2; m];
        let mut last = f64::INFINITY;
        for k in 0..30 {
            let w = CostWeights { w_r: 1e-4 * 1.5f64.powi(k), ..CostWeights::default() };
            let sol = solve_fdat_step(&model, &state, &target, &prev, &w, DT).unwrap();
            let norm = sol.a.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm <= last + 1e-12, "w_r {}: {norm} > {last}", w.w_r);
            last = norm;
        }
    }

    #[test]
    fn holding_the_initial_pose() {
        let model = quiet(2, 8);
        let rest = model.rest_state();
        let target = pose_feature(&model, &rest);
        let run = track_trajectory(&model, &rest, &[target.clone()], &CostWeights::default(), 50, DT).unwrap();
        assert_eq!(run.states.len(), 51);
        assert_eq!(run.solve_times.len(), 50);
        for (s, a) in run.states.iter().zip(&run.activations) {
            assert!(a.iter().all(|&x| x < 1e-9));
            assert!(summed_angle(pose_feature(&model, s).as_slice(), target.as_slice(), 2).to_degrees() < 0.1);
        }
    }

    #[test]
    fn step_change_error_decreases_after_transient() {
        let model = linear_chain();
        let m = model.num_muscles();
        let goal: Vec<f64> = (0..m).map(|j| [0.3, 0.0, 0.1, 0.0][j % 4]).collect();
        let target = pose_feature(&model, &settle(&model, &goal, 300));
        let w = CostWeights { delta_t: DT, ..CostWeights::default() };
        let run = track_trajectory(&model, &model.rest_state(), &[target.clone()], &w, 100, DT).unwrap();
        let err: Vec<f64> = run
            .states
            .iter()
            .map(|s| summed_angle(pose_feature(&model, s).as_slice(), target.as_slice(), 2).to_degrees())
            .collect();
        assert!(err[0] > 5.0);
        for k in 10..err.len() - 1 {
            assert!(err[k + 1] <= err[k] + 1e-9, "step {k}: {} -> {}", err[k], err[k + 1]);
        }
        assert!(err[100] < 0.1 * err[0], "final {}", err[100]);
    }

    #[test]
    fn without_tracking_term_excitations_decay_geometrically() {
        let model = quiet(1, 4);
        let w = CostWeights { w_u: 0.0, ..CostWeights::default() };
        let mut solver = FdatSolver::new(&model, w, DT);
        solver.a_prev = vec![0.8, 0.4, 0.2, 1.0];
        let start = solver.a_prev.clone();
        let ratio = w.w_d / (w.w_d + w.w_r);
        let target = pose_feature(&model, &model.rest_state());
        let run = solver.track(&model, &model.rest_state(), &[target], 5).unwrap();
        for (k, a) in run.activations.iter().enumerate() {
            for (x, x0) in a.iter().zip(&start) {
                assert!((x - x0 * ratio.powi(k as i32 + 1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let model = quiet(1, 4);
        let rest = model.rest_state();
        let target = pose_feature(&model, &rest);
        let w = CostWeights::default();
        assert!(matches!(
            solve_fdat_step(&model, &rest, &target, &[0.0; 3], &w, DT),
            Err(FdatError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            solve_fdat_step(&model, &rest, &DVector::zeros(3), &[0.0; 4], &w, DT),
            Err(FdatError::DimensionMismatch { .. })
        ));
        assert_eq!(track_trajectory(&model, &rest, &[target], &w, 0, DT).unwrap_err(), FdatError::NoSteps);
    }
}
