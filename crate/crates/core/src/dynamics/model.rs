use nalgebra::{Cholesky, Isometry3, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::muscle::Muscle;
use super::spring::FrameSpring;
use super::DynamicsError;

/// Rigid transform from a local frame to its parent (world, or a body).
pub type Pose = Isometry3<f64>;

/// Linear and angular velocity of a body, both in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Velocity of a world point rigidly attached to a body at `center`.
    pub fn point_velocity(&self, center: &Vector3<f64>, point: &Vector3<f64>) -> Vector3<f64> {
        self.linear + self.angular.cross(&(point - center))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidBody {
    pub mass: f64,
    /// Body-frame inertia about the center of mass, kg*m^2.
    pub inertia: Matrix3<f64>,
    /// Pose of the body at the rest configuration.
    pub rest_pose: Pose,
}

impl RigidBody {
    pub fn new(mass: f64, inertia: Matrix3<f64>, rest_pose: Pose) -> Result<Self, DynamicsError> {
        let body = Self {
            mass,
            inertia,
            rest_pose,
        };
        body.validate()?;
        Ok(body)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(DynamicsError::InvalidModel(format!(
                "body mass must be positive, got {}",
                self.mass
            )));
        }
        let sym_err = (self.inertia - self.inertia.transpose()).abs().max();
        if sym_err > 1e-12 * self.inertia.abs().max().max(1.0) {
            return Err(DynamicsError::InvalidModel("inertia is not symmetric".into()));
        }
        if Cholesky::new(self.inertia).is_none() {
            return Err(DynamicsError::InvalidModel(
                "inertia is not positive definite".into(),
            ));
        }
        Ok(())
    }

    pub fn world_inertia(&self, pose: &Pose) -> Matrix3<f64> {
        let r = pose.rotation.to_rotation_matrix();
        r.matrix() * self.inertia * r.matrix().transpose()
    }
}

/// Constant world-frame wrench applied at a body's center of mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalLoad {
    pub body: usize,
    pub force: Vector3<f64>,
    #[serde(default)]
    pub torque: Vector3<f64>,
}

/// Which quantities make up the pose-feature vector used by the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseFeature {
    /// Stacked body orientations `[w, x, y, z]` per body.
    #[default]
    Orientations,
    /// Orientations followed by stacked body positions.
    OrientationsAndPositions,
}

/// Fixed-base chain of rigid bodies joined by frame springs and driven by
/// line actuators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    pub bodies: Vec<RigidBody>,
    pub springs: Vec<FrameSpring>,
    pub muscles: Vec<Muscle>,
    pub gravity: Vector3<f64>,
    pub external_loads: Vec<ExternalLoad>,
    /// Semi-implicit Euler substeps taken inside one `step` call.
    pub substeps: usize,
    pub pose_feature: PoseFeature,
}

impl ChainModel {
    pub fn num_bodies(&self) -> usize {
        self.bodies.len()
    }

    pub fn num_muscles(&self) -> usize {
        self.muscles.len()
    }

    pub fn feature_dim(&self) -> usize {
        match self.pose_feature {
            PoseFeature::Orientations => 4 * self.bodies.len(),
            PoseFeature::OrientationsAndPositions => 7 * self.bodies.len(),
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.bodies.is_empty() {
            return Err(DynamicsError::InvalidModel("chain needs at least one body".into()));
        }
        if self.muscles.is_empty() {
            return Err(DynamicsError::InvalidModel("chain needs at least one muscle".into()));
        }
        if self.substeps == 0 {
            return Err(DynamicsError::InvalidModel("substeps must be >= 1".into()));
        }
        for body in &self.bodies {
            body.validate()?;
        }
        if self.springs.len() != self.bodies.len() {
            return Err(DynamicsError::InvalidModel(format!(
                "chain with {} bodies needs {} springs, got {}",
                self.bodies.len(),
                self.bodies.len(),
                self.springs.len()
            )));
        }
        for (i, spring) in self.springs.iter().enumerate() {
            let expected_a = if i == 0 { None } else { Some(i - 1) };
            if spring.body_a != expected_a || spring.body_b != i {
                return Err(DynamicsError::InvalidModel(format!(
                    "spring {i} must connect {expected_a:?} to body {i}"
                )));
            }
            spring.validate()?;
        }
        for (i, muscle) in self.muscles.iter().enumerate() {
            muscle.validate(self.bodies.len()).map_err(|e| match e {
                DynamicsError::InvalidModel(msg) => {
                    DynamicsError::InvalidModel(format!("muscle {i}: {msg}"))
                }
                other => other,
            })?;
        }
        for load in &self.external_loads {
            if load.body >= self.bodies.len() {
                return Err(DynamicsError::InvalidModel(format!(
                    "external load on missing body {}",
                    load.body
                )));
            }
        }
        Ok(())
    }

    /// State at the rest configuration with zero velocities.
    pub fn rest_state(&self) -> ModelState {
        ModelState {
            poses: self.bodies.iter().map(|b| b.rest_pose).collect(),
            twists: vec![Twist::zero(); self.bodies.len()],
            time: 0.0,
        }
    }

    /// Pose of a body, with `None` standing for the fixed base (world frame).
    pub fn pose_of(&self, state: &ModelState, body: Option<usize>) -> Pose {
        match body {
            Some(i) => state.poses[i],
            None => Pose::identity(),
        }
    }

    pub fn twist_of(&self, state: &ModelState, body: Option<usize>) -> Twist {
        match body {
            Some(i) => state.twists[i],
            None => Twist::zero(),
        }
    }
}

/// Instantaneous pose and twist of every dynamic body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub poses: Vec<Pose>,
    pub twists: Vec<Twist>,
    pub time: f64,
}

impl ModelState {
    pub fn is_finite(&self) -> bool {
        self.poses.iter().all(|p| {
            p.translation.vector.iter().all(|v| v.is_finite())
                && p.rotation.coords.iter().all(|v| v.is_finite())
        }) && self
            .twists
            .iter()
            .all(|t| t.linear.iter().chain(t.angular.iter()).all(|v| v.is_finite()))
    }
}

/// Muscle excitations, every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExcitationVector(Vec<f64>);

impl ExcitationVector {
    pub fn new(values: Vec<f64>) -> Result<Self, DynamicsError> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(DynamicsError::ExcitationOutOfRange { index, value });
            }
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Clip each entry to `[0, 1]`; NaN maps to 0.
    pub fn clipped(values: &[f64]) -> Self {
        Self(
            values
                .iter()
                .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for ExcitationVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}
