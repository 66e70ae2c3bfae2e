//! Declarative chain description and the builder that turns it into a
//! [`ChainModel`].

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::model::{ChainModel, ExternalLoad, Pose, PoseFeature, RigidBody};
use super::muscle::{Muscle, MuscleMode};
use super::spring::FrameSpring;
use super::DynamicsError;

/// Explicit muscle entry in the attachment table. Body `None` is the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleSpec {
    pub origin_body: Option<usize>,
    pub insertion_body: Option<usize>,
    pub origin_point: [f64; 3],
    pub insertion_point: [f64; 3],
    pub max_iso_force: f64,
    /// Defaults to the rest musculotendon length times `1 - tendon_ratio`.
    #[serde(default)]
    pub opt_fiber_length: Option<f64>,
    #[serde(default)]
    pub tendon_ratio: f64,
    #[serde(default)]
    pub pennation_deg: f64,
    #[serde(default)]
    pub mode: MuscleMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub body: usize,
    pub force: [f64; 3],
    #[serde(default)]
    pub torque: [f64; 3],
}

/// Parameterized fixed-base chain. Bodies are stacked along +z, one segment
/// apart; body 0 sits on the base. Each level (base to body 0, body k-1 to
/// body k) gets `muscles_per_level` obliquely wound muscles spaced evenly
/// around the chain axis, alternating twist direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub num_bodies: usize,
    pub segment_length: f64,
    pub mass: f64,
    /// Per-body overrides of `mass`.
    pub masses: Option<Vec<f64>>,
    pub inertia_diag: [f64; 3],
    pub stiffness: [f64; 6],
    /// Per-level overrides of `stiffness`.
    pub level_stiffness: Option<Vec<[f64; 6]>>,
    /// Defaults to `damping_ratio * stiffness` entrywise.
    pub damping: Option<[f64; 6]>,
    pub damping_ratio: f64,
    pub muscles_per_level: usize,
    pub muscle_radius: f64,
    pub muscle_twist_deg: f64,
    pub max_iso_force: f64,
    pub tendon_ratio: f64,
    pub pennation_deg: f64,
    pub muscle_mode: MuscleMode,
    /// Muscles appended after the generated layout.
    pub extra_muscles: Vec<MuscleSpec>,
    pub gravity: [f64; 3],
    /// Downward load on the top body (head-weight analogue), N.
    pub head_load: f64,
    /// Upward load on the top body; `None` balances the total weight of the
    /// chain plus the head load (pressure-support analogue).
    pub support_load: Option<f64>,
    pub external_loads: Vec<LoadSpec>,
    pub substeps: usize,
    pub include_positions: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            num_bodies: 5,
            segment_length: 0.1,
            mass: 10.0,
            masses: None,
            inertia_diag: [0.01, 0.01, 0.01],
            stiffness: [2.0e4, 2.0e4, 8.0e4, 100.0, 100.0, 100.0],
            level_stiffness: None,
            damping: None,
            damping_ratio: 0.05,
            muscles_per_level: 8,
            muscle_radius: 0.06,
            muscle_twist_deg: 15.0,
            max_iso_force: 1000.0,
            tendon_ratio: 0.2,
            pennation_deg: 0.0,
            muscle_mode: MuscleMode::Hill,
            extra_muscles: Vec::new(),
            gravity: [0.0, 0.0, -9.81],
            head_load: 50.0,
            support_load: None,
            external_loads: Vec::new(),
            substeps: 10,
            include_positions: false,
        }
    }
}

impl ChainConfig {
    /// Chain with `num_bodies` bodies and `muscles_per_level` muscles per level.
    pub fn with_counts(num_bodies: usize, muscles_per_level: usize) -> Self {
        Self {
            num_bodies,
            muscles_per_level,
            ..Self::default()
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, DynamicsError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| DynamicsError::Config(format!("{}: {e}", path.as_ref().display())))?;
        serde_json::from_str(&text).map_err(|e| DynamicsError::Config(e.to_string()))
    }

    pub fn body_mass(&self, i: usize) -> f64 {
        self.masses.as_ref().map_or(self.mass, |m| m[i])
    }

    fn level_stiffness(&self, level: usize) -> [f64; 6] {
        self.level_stiffness.as_ref().map_or(self.stiffness, |s| s[level])
    }

    fn check(&self) -> Result<(), DynamicsError> {
        let bad = |m: String| Err(DynamicsError::InvalidModel(m));
        if self.num_bodies == 0 {
            return bad("num_bodies must be >= 1".into());
        }
        if self.muscles_per_level == 0 && self.extra_muscles.is_empty() {
            return bad("the chain needs at least one muscle".into());
        }
        if !(self.segment_length > 0.0) {
            return bad("segment_length must be positive".into());
        }
        if let Some(m) = &self.masses {
            if m.len() != self.num_bodies {
                return bad(format!("masses has {} entries for {} bodies", m.len(), self.num_bodies));
            }
        }
        if let Some(s) = &self.level_stiffness {
            if s.len() != self.num_bodies {
                return bad(format!("level_stiffness has {} entries for {} levels", s.len(), self.num_bodies));
            }
        }
        for i in 0..self.num_bodies {
            if !(self.body_mass(i) > 0.0) {
                return bad(format!("body {i} mass must be positive"));
            }
            if self.level_stiffness(i).iter().any(|k| !(*k > 0.0)) {
                return bad(format!("level {i} stiffness entries must be positive"));
            }
        }
        if self.inertia_diag.iter().any(|v| !(*v > 0.0)) {
            return bad("inertia entries must be positive".into());
        }
        if self.muscles_per_level > 0 && !(self.muscle_radius > 0.0) {
            return bad("muscle_radius must be positive".into());
        }
        Ok(())
    }
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

pub fn build_chain(config: &ChainConfig) -> Result<ChainModel, DynamicsError> {
    config.check()?;
    let n = config.num_bodies;
    let s = config.segment_length;

    let bodies = (0..n)
        .map(|i| {
            let rest = Pose::from_parts(
                Translation3::new(0.0, 0.0, (i as f64 + 0.5) * s),
                UnitQuaternion::identity(),
            );
            RigidBody::new(config.body_mass(i), Matrix3::from_diagonal(&vec3(config.inertia_diag)), rest)
        })
        .collect::<Result<Vec<_>, _>>()?;

    // spring i sits at the joint between level i-1 (or the base) and body i
    let springs = (0..n)
        .map(|i| {
            let stiffness = config.level_stiffness(i);
            let damping = config
                .damping
                .unwrap_or_else(|| stiffness.map(|k| config.damping_ratio * k));
            let attach_a = if i == 0 {
                Pose::identity()
            } else {
                Pose::from_parts(Translation3::new(0.0, 0.0, 0.5 * s), UnitQuaternion::identity())
            };
            let attach_b = Pose::from_parts(Translation3::new(0.0, 0.0, -0.5 * s), UnitQuaternion::identity());
            // rest pose measured from the built geometry so the rest state is
            // an exact fixed point
            let pose_a = i.checked_sub(1).map_or(Pose::identity(), |a| bodies[a].rest_pose);
            let rest = (pose_a * attach_a).inverse() * (bodies[i].rest_pose * attach_b);
            FrameSpring {
                body_a: i.checked_sub(1),
                body_b: i,
                attach_a,
                attach_b,
                rest,
                stiffness,
                damping,
            }
        })
        .collect::<Vec<_>>();

    let mut muscles = Vec::new();
    let m = config.muscles_per_level;
    let twist = config.muscle_twist_deg.to_radians();
    let pennation = config.pennation_deg.to_radians();
    for level in 0..n {
        for j in 0..m {
            let theta = 2.0 * PI * j as f64 / m as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let r = config.muscle_radius;
            let (origin_body, origin_point) = if level == 0 {
                // base attachment in world coordinates, half a segment below joint 0
                (None, Vector3::new(r * theta.cos(), r * theta.sin(), -0.5 * s))
            } else {
                (Some(level - 1), Vector3::new(r * theta.cos(), r * theta.sin(), 0.0))
            };
            let phi = theta + sign * twist;
            let insertion_point = Vector3::new(r * phi.cos(), r * phi.sin(), 0.0);
            muscles.push((origin_body, origin_point, Some(level), insertion_point, config.max_iso_force,
                None, config.tendon_ratio, pennation, config.muscle_mode));
        }
    }
    for spec in &config.extra_muscles {
        muscles.push((spec.origin_body, vec3(spec.origin_point), spec.insertion_body, vec3(spec.insertion_point),
            spec.max_iso_force, spec.opt_fiber_length, spec.tendon_ratio, spec.pennation_deg.to_radians(), spec.mode));
    }

    let world = |body: Option<usize>, p: &Vector3<f64>| match body {
        Some(b) => bodies[b].rest_pose * nalgebra::Point3::from(*p),
        None => nalgebra::Point3::from(*p),
    };
    let muscles = muscles
        .into_iter()
        .map(|(ob, op, ib, ip, f0, opt, tr, pen, mode)| {
            let rest_length = (world(ib, &ip) - world(ob, &op)).norm();
            Muscle {
                origin_body: ob,
                insertion_body: ib,
                origin_point: op,
                insertion_point: ip,
                max_iso_force: f0,
                opt_fiber_length: opt.unwrap_or(rest_length * (1.0 - tr)),
                tendon_ratio: tr,
                pennation: pen,
                mode,
                max_velocity: 10.0,
            }
        })
        .collect::<Vec<_>>();

    let mut external_loads: Vec<ExternalLoad> = config
        .external_loads
        .iter()
        .map(|l| ExternalLoad {
            body: l.body,
            force: vec3(l.force),
            torque: vec3(l.torque),
        })
        .collect();
    let gravity = vec3(config.gravity);
    let top = n - 1;
    if config.head_load != 0.0 {
        external_loads.push(ExternalLoad {
            body: top,
            force: Vector3::new(0.0, 0.0, -config.head_load),
            torque: Vector3::zeros(),
        });
    }
    let total_weight = -gravity.z * (0..n).map(|i| config.body_mass(i)).sum::<f64>();
    let support = config.support_load.unwrap_or(total_weight + config.head_load);
    if support != 0.0 {
        external_loads.push(ExternalLoad {
            body: top,
            force: Vector3::new(0.0, 0.0, support),
            torque: Vector3::zeros(),
        });
    }

    let model = ChainModel {
        bodies,
        springs,
        muscles,
        gravity,
        external_loads,
        substeps: config.substeps,
        pose_feature: if config.include_positions {
            PoseFeature::OrientationsAndPositions
        } else {
            PoseFeature::Orientations
        },
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let model = build_chain(&ChainConfig::default()).unwrap();
        assert_eq!(model.num_bodies(), 5);
        assert_eq!(model.springs.len(), 5);
        assert_eq!(model.num_muscles(), 40);
    }

    #[test]
    fn single_body_pendulum() {
        let model = build_chain(&ChainConfig::with_counts(1, 4)).unwrap();
        assert_eq!(model.num_bodies(), 1);
        assert_eq!(model.num_muscles(), 4);
        assert!(model.springs[0].body_a.is_none());
    }

    #[test]
    fn rejects_bad_configs() {
        let zero_mass = ChainConfig {
            mass: 0.0,
            ..ChainConfig::default()
        };
        assert!(matches!(build_chain(&zero_mass), Err(DynamicsError::InvalidModel(_))));
        let no_bodies = ChainConfig::with_counts(0, 8);
        assert!(build_chain(&no_bodies).is_err());
        let soft = ChainConfig {
            stiffness: [1.0, 1.0, 0.0, 1.0, 1.0, 1.0],
            ..ChainConfig::default()
        };
        assert!(build_chain(&soft).is_err());
        let no_muscles = ChainConfig::with_counts(2, 0);
        assert!(build_chain(&no_muscles).is_err());
    }

    #[test]
    fn muscles_start_at_optimal_length() {
        let model = build_chain(&ChainConfig::default()).unwrap();
        let state = model.rest_state();
        for j in 0..model.num_muscles() {
            let geo = crate::dynamics::muscle_geometry(&model, &state, j).unwrap();
            let l = model.muscles[j].normalized_length(geo.length);
            assert!((l - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = ChainConfig::with_counts(2, 8);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ChainConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let partial: ChainConfig = serde_json::from_str(r#"{"num_bodies": 3}"#).unwrap();
        assert_eq!(partial.num_bodies, 3);
        assert_eq!(partial.muscles_per_level, 8);
    }
}
