use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x6, Quaternion, Translation3, Vector3};

use super::model::{ChainModel, ExcitationVector, ModelState, PoseFeature, Twist};
use super::muscle::{muscle_force, muscle_geometry, tension_velocity_slope};
use super::quat::{canonical, renormalize};
use super::DynamicsError;

/// Net force and moment about each body's center of mass, world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyLoads {
    pub forces: Vec<Vector3<f64>>,
    pub torques: Vec<Vector3<f64>>,
}

impl BodyLoads {
    fn zeros(n: usize) -> Self {
        Self {
            forces: vec![Vector3::zeros(); n],
            torques: vec![Vector3::zeros(); n],
        }
    }

    fn add(&mut self, body: usize, center: &Vector3<f64>, point: &Vector3<f64>, force: Vector3<f64>, moment: Vector3<f64>) {
        self.forces[body] += force;
        self.torques[body] += moment + (point - center).cross(&force);
    }
}

fn check_excitations(model: &ChainModel, excitations: &[f64]) -> Result<(), DynamicsError> {
    if excitations.len() != model.num_muscles() {
        return Err(DynamicsError::DimensionMismatch {
            what: "excitations",
            expected: model.num_muscles(),
            got: excitations.len(),
        });
    }
    Ok(())
}

/// Gravity, external, spring and muscle loads on every body.
pub fn body_loads(model: &ChainModel, state: &ModelState, excitations: &ExcitationVector) -> Result<BodyLoads, DynamicsError> {
    check_excitations(model, excitations)?;
    let n = model.num_bodies();
    let mut loads = BodyLoads::zeros(n);
    let centers: Vec<Vector3<f64>> = state.poses.iter().map(|p| p.translation.vector).collect();

    for (i, body) in model.bodies.iter().enumerate() {
        loads.forces[i] += body.mass * model.gravity;
    }
    for load in &model.external_loads {
        loads.forces[load.body] += load.force;
        loads.torques[load.body] += load.torque;
    }
    for spring in &model.springs {
        let pose_a = model.pose_of(state, spring.body_a);
        let twist_a = model.twist_of(state, spring.body_a);
        let b = spring.body_b;
        let load = spring.wrench(&pose_a, &state.poses[b], &twist_a, &state.twists[b]);
        if let Some(a) = spring.body_a {
            loads.add(a, &centers[a], &load.point, load.on_a.force, load.on_a.moment);
        }
        loads.add(b, &centers[b], &load.point, load.on_b.force, load.on_b.moment);
    }
    for (j, muscle) in model.muscles.iter().enumerate() {
        let geo = muscle_geometry(model, state, j)?;
        let tension = muscle_force(
            muscle,
            excitations[j],
            muscle.normalized_length(geo.length),
            muscle.normalized_velocity(geo.lengthening_velocity),
        )?;
        if tension == 0.0 {
            continue;
        }
        // pulls the two attachment points toward each other
        let pull = tension * geo.direction;
        if let Some(o) = muscle.origin_body {
            loads.add(o, &centers[o], &geo.origin_world, pull, Vector3::zeros());
        }
        if let Some(i) = muscle.insertion_body {
            loads.add(i, &centers[i], &geo.insertion_world, -pull, Vector3::zeros());
        }
    }
    Ok(loads)
}

/// Velocity map `[I, -[r]x]` of a world point at offset `r` from a body center.
fn point_jacobian(r: &Vector3<f64>) -> Matrix3x6<f64> {
    let mut g = Matrix3x6::zeros();
    g.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    g.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-r.cross_matrix()));
    g
}

/// Symmetric positive semidefinite matrix `C` with generalized damping forces
/// `-C V` to first order, `V` the stacked `[v; w]` body twists. Collects the
/// spring dampers and the force-velocity dependence of active muscles.
pub fn damping_matrix(model: &ChainModel, state: &ModelState, excitations: &ExcitationVector) -> Result<DMatrix<f64>, DynamicsError> {
    check_excitations(model, excitations)?;
    let n = model.num_bodies();
    let mut c = DMatrix::zeros(6 * n, 6 * n);
    // rows of a velocity map per body; `None` is the base and drops out
    let mut add = |rows: &[(Option<usize>, Matrix3x6<f64>)], d: &Matrix3<f64>| {
        for (bi, gi) in rows {
            let Some(i) = bi else { continue };
            for (bj, gj) in rows {
                let Some(j) = bj else { continue };
                let block = gi.transpose() * d * gj;
                let mut view = c.view_mut((6 * i, 6 * j), (6, 6));
                view += block;
            }
        }
    };
    let center = |b: Option<usize>| b.map_or(Vector3::zeros(), |i| state.poses[i].translation.vector);
    for spring in &model.springs {
        let pose_a = model.pose_of(state, spring.body_a);
        let (point, dt, dr) = spring.damping_world(&pose_a, &state.poses[spring.body_b]);
        let b = Some(spring.body_b);
        let ga = -point_jacobian(&(point - center(spring.body_a)));
        let gb = point_jacobian(&(point - center(b)));
        add(&[(spring.body_a, ga), (b, gb)], &dt);
        let mut wa = Matrix3x6::zeros();
        wa.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-Matrix3::identity()));
        let mut wb = Matrix3x6::zeros();
        wb.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
        add(&[(spring.body_a, wa), (b, wb)], &dr);
    }
    for (j, muscle) in model.muscles.iter().enumerate() {
        let slope = {
            let geo = muscle_geometry(model, state, j)?;
            let k = tension_velocity_slope(
                muscle,
                excitations[j],
                muscle.normalized_length(geo.length),
                muscle.normalized_velocity(geo.lengthening_velocity),
            );
            (k, geo)
        };
        let (k, geo) = slope;
        if k == 0.0 {
            continue;
        }
        let go = -point_jacobian(&(geo.origin_world - center(muscle.origin_body)));
        let gi = point_jacobian(&(geo.insertion_world - center(muscle.insertion_body)));
        let ddt = geo.direction * geo.direction.transpose() * k;
        add(&[(muscle.origin_body, go), (muscle.insertion_body, gi)], &ddt);
    }
    Ok(c)
}

fn substep(model: &ChainModel, state: &mut ModelState, excitations: &ExcitationVector, h: f64) -> Result<(), DynamicsError> {
    let n = model.num_bodies();
    let loads = body_loads(model, state, excitations)?;
    // velocity update implicit in the linearized damping:
    // (M + h C) dV = h Q(x, V)
    let mut lhs = damping_matrix(model, state, excitations)? * h;
    let mut rhs = DVector::zeros(6 * n);
    for (i, body) in model.bodies.iter().enumerate() {
        let inertia = body.world_inertia(&state.poses[i]);
        let w = state.twists[i].angular;
        let gyro = w.cross(&(inertia * w));
        for k in 0..3 {
            lhs[(6 * i + k, 6 * i + k)] += body.mass;
            rhs[6 * i + k] = h * loads.forces[i][k];
            rhs[6 * i + 3 + k] = h * (loads.torques[i][k] - gyro[k]);
        }
        let mut view = lhs.view_mut((6 * i + 3, 6 * i + 3), (3, 3));
        view += inertia;
    }
    let dv = lhs
        .cholesky()
        .ok_or(DynamicsError::Diverged { time: state.time })?
        .solve(&rhs);
    for i in 0..n {
        let pose = &mut state.poses[i];
        let twist = &mut state.twists[i];
        twist.linear += dv.fixed_rows::<3>(6 * i);
        twist.angular += dv.fixed_rows::<3>(6 * i + 3);

        pose.translation = Translation3::from(pose.translation.vector + h * twist.linear);
        // q <- q + h/2 * (0, w) * q, then renormalize
        let w = twist.angular;
        let q = pose.rotation.into_inner();
        let dq = Quaternion::new(0.0, w.x, w.y, w.z) * q * (0.5 * h);
        pose.rotation = renormalize(q + dq);
    }
    Ok(())
}

/// Advance the model by `dt` seconds using semi-implicit Euler substeps:
/// velocities are updated from the current loads (damping taken implicitly
/// through its linearization), then poses from the new velocities, with
/// quaternion renormalization after every substep.
pub fn step(model: &ChainModel, state: &ModelState, excitations: &ExcitationVector, dt: f64) -> Result<ModelState, DynamicsError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(DynamicsError::InvalidTimestep(dt));
    }
    check_excitations(model, excitations)?;
    let mut next = state.clone();
    let h = dt / model.substeps as f64;
    for _ in 0..model.substeps {
        substep(model, &mut next, excitations, h)?;
        if !next.is_finite() {
            return Err(DynamicsError::Diverged { time: next.time });
        }
    }
    next.time = state.time + dt;
    Ok(next)
}

pub fn kinetic_energy(model: &ChainModel, state: &ModelState) -> f64 {
    model
        .bodies
        .iter()
        .zip(state.poses.iter().zip(&state.twists))
        .map(|(body, (pose, twist))| {
            let inertia = body.world_inertia(pose);
            0.5 * body.mass * twist.linear.norm_squared() + 0.5 * twist.angular.dot(&(inertia * twist.angular))
        })
        .sum()
}

/// Spring, passive-muscle, gravity and constant-force potential. Constant
/// external torques have no potential and are left out.
pub fn potential_energy(model: &ChainModel, state: &ModelState) -> Result<f64, DynamicsError> {
    let mut energy = 0.0;
    for spring in &model.springs {
        let pose_a = model.pose_of(state, spring.body_a);
        energy += spring.energy(&pose_a, &state.poses[spring.body_b]);
    }
    for (j, muscle) in model.muscles.iter().enumerate() {
        energy += muscle.passive_energy(muscle_geometry(model, state, j)?.length);
    }
    for (body, pose) in model.bodies.iter().zip(&state.poses) {
        energy -= body.mass * model.gravity.dot(&pose.translation.vector);
    }
    for load in &model.external_loads {
        energy -= load.force.dot(&state.poses[load.body].translation.vector);
    }
    Ok(energy)
}

pub fn spring_energy(model: &ChainModel, state: &ModelState) -> f64 {
    model
        .springs
        .iter()
        .map(|s| s.energy(&model.pose_of(state, s.body_a), &state.poses[s.body_b]))
        .sum()
}

/// Stacked canonical orientations `[w, x, y, z]` per body, followed by body
/// positions when the model is configured for them.
pub fn pose_feature(model: &ChainModel, state: &ModelState) -> DVector<f64> {
    let n = model.num_bodies();
    let mut u = DVector::zeros(model.feature_dim());
    for (i, pose) in state.poses.iter().enumerate() {
        let q = canonical(pose.rotation);
        u[4 * i] = q.w;
        u[4 * i + 1] = q.i;
        u[4 * i + 2] = q.j;
        u[4 * i + 3] = q.k;
        if model.pose_feature == PoseFeature::OrientationsAndPositions {
            let p = pose.translation.vector;
            for k in 0..3 {
                u[4 * n + 3 * i + k] = p[k];
            }
        }
    }
    u
}

/// Affine one-step response of the pose feature to the excitations,
/// `u(a) ~ u0 + lambda * a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivity {
    pub lambda: DMatrix<f64>,
    pub u0: DVector<f64>,
}

impl Sensitivity {
    pub fn predict(&self, a: &[f64]) -> DVector<f64> {
        &self.u0 + &self.lambda * DVector::from_column_slice(a)
    }
}

/// Probe the next-step pose feature under zero excitation and under a unit
/// excitation of each muscle in turn, all from the same state.
pub fn sensitivity(model: &ChainModel, state: &ModelState, dt: f64) -> Result<Sensitivity, DynamicsError> {
    let m = model.num_muscles();
    let base = step(model, state, &ExcitationVector::zeros(m), dt)?;
    let u0 = pose_feature(model, &base);
    let mut lambda = DMatrix::zeros(u0.len(), m);
    let mut probe = vec![0.0; m];
    for j in 0..m {
        probe[j] = 1.0;
        let next = step(model, state, &ExcitationVector::new(probe.clone())?, dt)?;
        lambda.set_column(j, &(pose_feature(model, &next) - &u0));
        probe[j] = 0.0;
    }
    Ok(Sensitivity { lambda, u0 })
}

/// Zero twist everywhere.
pub fn at_rest(state: &ModelState) -> ModelState {
    ModelState {
        twists: vec![Twist::zero(); state.twists.len()],
        ..state.clone()
    }
}
