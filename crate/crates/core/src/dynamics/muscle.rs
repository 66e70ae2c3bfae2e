//! Straight-line musculotendon actuators.
//!
//! The tendon is rigid: the fiber takes the fraction `1 - tendon_ratio` of the
//! musculotendon length. Tension in Hill mode is
//! `F0 * cos(pennation) * (a * fL(l) * fV(v) + fPE(l))` with smooth analytic
//! curves; tension is never negative.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::model::{ChainModel, ModelState};
use super::DynamicsError;

/// Width of the Gaussian active force-length curve.
pub const FL_WIDTH: f64 = 0.45;
/// Passive curve gain, chosen so that `fPE(1.5) = 1`.
pub const PASSIVE_GAIN: f64 = 2.0;
/// Asymptotic eccentric force enhancement.
pub const FV_ECCENTRIC_MAX: f64 = 1.4;
/// Curvature of the concentric Hill hyperbola.
pub const FV_CONCENTRIC_SHAPE: f64 = 0.25;
/// Eccentric saturation rate, matched to the concentric slope at zero velocity.
pub const FV_ECCENTRIC_SHAPE: f64 = (FV_ECCENTRIC_MAX - 1.0) / (1.0 + 1.0 / FV_CONCENTRIC_SHAPE);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuscleMode {
    Linear,
    #[default]
    Hill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Muscle {
    /// `None` attaches to the fixed base; the point is then in world coordinates.
    pub origin_body: Option<usize>,
    pub insertion_body: Option<usize>,
    pub origin_point: Vector3<f64>,
    pub insertion_point: Vector3<f64>,
    pub max_iso_force: f64,
    pub opt_fiber_length: f64,
    pub tendon_ratio: f64,
    pub pennation: f64,
    pub mode: MuscleMode,
    /// Maximum shortening velocity in optimal fiber lengths per second.
    #[serde(default = "default_max_velocity")]
    pub max_velocity: f64,
}

fn default_max_velocity() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuscleGeometry {
    pub length: f64,
    /// Rate of change of length; positive while lengthening.
    pub lengthening_velocity: f64,
    /// Unit vector from the origin point to the insertion point.
    pub direction: Vector3<f64>,
    pub origin_world: Vector3<f64>,
    pub insertion_world: Vector3<f64>,
}

impl Muscle {
    pub fn validate(&self, num_bodies: usize) -> Result<(), DynamicsError> {
        let bad = |msg: &str| Err(DynamicsError::InvalidModel(msg.to_string()));
        if !(self.max_iso_force > 0.0) {
            return bad("max_iso_force must be positive");
        }
        if !(self.opt_fiber_length > 0.0) {
            return bad("opt_fiber_length must be positive");
        }
        if !(0.0..1.0).contains(&self.tendon_ratio) {
            return bad("tendon_ratio must lie in [0, 1)");
        }
        if !(self.max_velocity > 0.0) {
            return bad("max_velocity must be positive");
        }
        if !self.pennation.is_finite() || self.pennation.abs() >= std::f64::consts::FRAC_PI_2 {
            return bad("pennation must lie in (-pi/2, pi/2)");
        }
        for b in [self.origin_body, self.insertion_body].into_iter().flatten() {
            if b >= num_bodies {
                return bad("attachment body index out of range");
            }
        }
        Ok(())
    }

    pub fn fiber_scale(&self) -> f64 {
        (1.0 - self.tendon_ratio) / self.opt_fiber_length
    }

    pub fn normalized_length(&self, length: f64) -> f64 {
        length * (1.0 - self.tendon_ratio) / self.opt_fiber_length
    }

    /// Fiber velocity in units of the maximum contraction velocity.
    pub fn normalized_velocity(&self, velocity: f64) -> f64 {
        velocity * (1.0 - self.tendon_ratio) / self.opt_fiber_length / self.max_velocity
    }

    pub fn tension(&self, excitation: f64, norm_length: f64, norm_velocity: f64) -> Result<f64, DynamicsError> {
        muscle_force(self, excitation, norm_length, norm_velocity)
    }

    /// Elastic energy stored in the passive element at `length`.
    pub fn passive_energy(&self, length: f64) -> f64 {
        let stretch = self.normalized_length(length) - 1.0;
        if stretch <= 0.0 {
            return 0.0;
        }
        let scale = match self.mode {
            MuscleMode::Hill => self.pennation.cos(),
            MuscleMode::Linear => 1.0,
        };
        // integral of F0 * (g * s)^2 over the musculotendon length
        self.max_iso_force * scale * PASSIVE_GAIN * PASSIVE_GAIN * stretch.powi(3) / (3.0 * self.fiber_scale())
    }
}

/// Active force-length curve, peak 1 at `l = 1`.
pub fn active_force_length(norm_length: f64) -> f64 {
    let x = (norm_length - 1.0) / FL_WIDTH;
    (-x * x).exp()
}

/// Force-velocity curve: 0 at maximum shortening, 1 when isometric,
/// saturating at [`FV_ECCENTRIC_MAX`] while lengthening.
pub fn force_velocity(norm_velocity: f64) -> f64 {
    if norm_velocity <= -1.0 {
        0.0
    } else if norm_velocity <= 0.0 {
        (1.0 + norm_velocity) / (1.0 - norm_velocity / FV_CONCENTRIC_SHAPE)
    } else {
        let x = norm_velocity / FV_ECCENTRIC_SHAPE;
        (1.0 + FV_ECCENTRIC_MAX * x) / (1.0 + x)
    }
}

/// Derivative of [`force_velocity`].
pub fn force_velocity_slope(norm_velocity: f64) -> f64 {
    if norm_velocity <= -1.0 {
        0.0
    } else if norm_velocity <= 0.0 {
        let c = FV_CONCENTRIC_SHAPE;
        let den = 1.0 - norm_velocity / c;
        (den + (1.0 + norm_velocity) / c) / (den * den)
    } else {
        let x = norm_velocity / FV_ECCENTRIC_SHAPE;
        (FV_ECCENTRIC_MAX - 1.0) / ((1.0 + x) * (1.0 + x)) / FV_ECCENTRIC_SHAPE
    }
}

/// Passive force-length curve, zero while slack.
pub fn passive_force_length(norm_length: f64) -> f64 {
    let s = (PASSIVE_GAIN * (norm_length - 1.0)).max(0.0);
    s * s
}

pub fn muscle_force(muscle: &Muscle, excitation: f64, norm_length: f64, norm_velocity: f64) -> Result<f64, DynamicsError> {
    if !(0.0..=1.0).contains(&excitation) {
        return Err(DynamicsError::ExcitationOutOfRange {
            index: 0,
            value: excitation,
        });
    }
    let passive = passive_force_length(norm_length);
    let tension = match muscle.mode {
        MuscleMode::Linear => muscle.max_iso_force * (excitation + passive),
        MuscleMode::Hill => {
            muscle.max_iso_force
                * muscle.pennation.cos()
                * (excitation * active_force_length(norm_length) * force_velocity(norm_velocity) + passive)
        }
    };
    Ok(tension.max(0.0))
}

/// Rate of change of tension with lengthening velocity, N*s/m.
pub fn tension_velocity_slope(muscle: &Muscle, excitation: f64, norm_length: f64, norm_velocity: f64) -> f64 {
    match muscle.mode {
        MuscleMode::Linear => 0.0,
        MuscleMode::Hill => {
            let total = excitation * active_force_length(norm_length) * force_velocity(norm_velocity)
                + passive_force_length(norm_length);
            if total <= 0.0 {
                return 0.0;
            }
            muscle.max_iso_force
                * muscle.pennation.cos()
                * excitation
                * active_force_length(norm_length)
                * force_velocity_slope(norm_velocity)
                * (1.0 - muscle.tendon_ratio)
                / muscle.opt_fiber_length
                / muscle.max_velocity
        }
    }
}

pub fn muscle_geometry(model: &ChainModel, state: &ModelState, index: usize) -> Result<MuscleGeometry, DynamicsError> {
    let muscle = &model.muscles[index];
    let origin_pose = model.pose_of(state, muscle.origin_body);
    let insertion_pose = model.pose_of(state, muscle.insertion_body);
    let origin_world = origin_pose * nalgebra::Point3::from(muscle.origin_point);
    let insertion_world = insertion_pose * nalgebra::Point3::from(muscle.insertion_point);
    let span = insertion_world - origin_world;
    let length = span.norm();
    if length < 1e-9 {
        return Err(DynamicsError::CoincidentAttachments { muscle: index });
    }
    let direction = span / length;
    let v_origin = model
        .twist_of(state, muscle.origin_body)
        .point_velocity(&origin_pose.translation.vector, &origin_world.coords);
    let v_insertion = model
        .twist_of(state, muscle.insertion_body)
        .point_velocity(&insertion_pose.translation.vector, &insertion_world.coords);
    Ok(MuscleGeometry {
        length,
        lengthening_velocity: direction.dot(&(v_insertion - v_origin)),
        direction,
        origin_world: origin_world.coords,
        insertion_world: insertion_world.coords,
    })
}
