//! Mass-less six-dimensional frame springs.
//!
//! A spring joins an attachment frame on body A (or the fixed base) to an
//! attachment frame on body B. The displacement is the pose of frame B seen
//! from frame A relative to the rest pose: a translation residual in frame A
//! and the rotation vector (log map) of the residual rotation. The stored
//! energy is `0.5 * sum(k_i * e_i^2)` over those six coordinates, and the
//! elastic wrench is its exact gradient with respect to the two body poses.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::model::{Pose, Twist};
use super::quat::{inv_right_jacobian, log_map};
use super::DynamicsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSpring {
    /// `None` is the fixed base.
    pub body_a: Option<usize>,
    pub body_b: usize,
    /// Attachment frame in body A coordinates (world coordinates for the base).
    pub attach_a: Pose,
    /// Attachment frame in body B coordinates.
    pub attach_b: Pose,
    /// Pose of frame B relative to frame A at rest.
    pub rest: Pose,
    /// Diagonal stiffness: N/m for x, y, z then N*m/rad for rx, ry, rz.
    pub stiffness: [f64; 6],
    /// Diagonal damping: N*s/m then N*m*s/rad.
    pub damping: [f64; 6],
}

/// Force and moment, the moment taken about the load's reference point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl std::ops::Neg for Wrench {
    type Output = Wrench;

    fn neg(self) -> Wrench {
        Wrench {
            force: -self.force,
            moment: -self.moment,
        }
    }
}

impl Wrench {
    /// Moment about `center` of this wrench acting at `point`.
    pub fn moment_about(&self, point: &Vector3<f64>, center: &Vector3<f64>) -> Vector3<f64> {
        self.moment + (point - center).cross(&self.force)
    }
}

/// Equal and opposite wrenches produced by one spring, both referred to the
/// world position of the spring's B attachment frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringLoad {
    pub point: Vector3<f64>,
    pub on_a: Wrench,
    pub on_b: Wrench,
}

struct Displacement {
    frame_a: Pose,
    frame_b: Pose,
    translation: Vector3<f64>,
    rotation: Vector3<f64>,
}

impl FrameSpring {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.stiffness.iter().any(|k| !(*k >= 0.0) || !k.is_finite()) {
            return Err(DynamicsError::InvalidModel(
                "spring stiffness entries must be finite and >= 0".into(),
            ));
        }
        if self.damping.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(DynamicsError::InvalidModel(
                "spring damping entries must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    fn displacement(&self, pose_a: &Pose, pose_b: &Pose) -> Displacement {
        let frame_a = pose_a * self.attach_a;
        let frame_b = pose_b * self.attach_b;
        let rel = frame_a.inverse() * frame_b;
        let translation = rel.translation.vector - self.rest.translation.vector;
        let residual = self.rest.rotation.inverse() * rel.rotation;
        Displacement {
            frame_a,
            frame_b,
            translation,
            rotation: log_map(&residual),
        }
    }

    /// Six-vector pose error `[translation; rotation vector]`.
    pub fn pose_error(&self, pose_a: &Pose, pose_b: &Pose) -> [f64; 6] {
        let d = self.displacement(pose_a, pose_b);
        [
            d.translation.x,
            d.translation.y,
            d.translation.z,
            d.rotation.x,
            d.rotation.y,
            d.rotation.z,
        ]
    }

    pub fn energy(&self, pose_a: &Pose, pose_b: &Pose) -> f64 {
        let e = self.pose_error(pose_a, pose_b);
        0.5 * e
            .iter()
            .zip(&self.stiffness)
            .map(|(e, k)| k * e * e)
            .sum::<f64>()
    }

    fn kt(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(
            self.stiffness[0],
            self.stiffness[1],
            self.stiffness[2],
        ))
    }

    fn kr(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(
            self.stiffness[3],
            self.stiffness[4],
            self.stiffness[5],
        ))
    }

    fn dt(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.damping[0], self.damping[1], self.damping[2]))
    }

    fn dr(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.damping[3], self.damping[4], self.damping[5]))
    }

    /// World position of the B frame and the world-frame translational and
    /// rotational damping matrices.
    pub fn damping_world(&self, pose_a: &Pose, pose_b: &Pose) -> (Vector3<f64>, Matrix3<f64>, Matrix3<f64>) {
        let frame_a = pose_a * self.attach_a;
        let frame_b = pose_b * self.attach_b;
        let ra = frame_a.rotation.to_rotation_matrix().into_inner();
        (
            frame_b.translation.vector,
            ra * self.dt() * ra.transpose(),
            ra * self.dr() * ra.transpose(),
        )
    }

    /// Elastic plus damping wrench pair. `twist_*` are world-frame body
    /// twists about each body's own origin.
    pub fn wrench(&self, pose_a: &Pose, pose_b: &Pose, twist_a: &Twist, twist_b: &Twist) -> SpringLoad {
        let d = self.displacement(pose_a, pose_b);
        let point = d.frame_b.translation.vector;
        let ra = d.frame_a.rotation.to_rotation_matrix().into_inner();
        let rb = d.frame_b.rotation.to_rotation_matrix().into_inner();

        let elastic_force = ra * (self.kt() * d.translation);
        let elastic_moment =
            rb * (inv_right_jacobian(&d.rotation).transpose() * (self.kr() * d.rotation));

        // relative motion of B's frame origin against the coincident point of A
        let center_a = pose_a.translation.vector;
        let center_b = pose_b.translation.vector;
        let v_rel = twist_b.point_velocity(&center_b, &point) - twist_a.point_velocity(&center_a, &point);
        let w_rel = twist_b.angular - twist_a.angular;
        let damping_force = ra * (self.dt() * (ra.transpose() * v_rel));
        let damping_moment = ra * (self.dr() * (ra.transpose() * w_rel));

        let on_a = Wrench {
            force: elastic_force + damping_force,
            moment: elastic_moment + damping_moment,
        };
        SpringLoad {
            point,
            on_a,
            on_b: -on_a,
        }
    }
}

/// Free-function form of [`FrameSpring::wrench`], returning `(on_a, on_b)`.
pub fn spring_wrench(
    spring: &FrameSpring,
    pose_a: &Pose,
    pose_b: &Pose,
    twist_a: &Twist,
    twist_b: &Twist,
) -> (Wrench, Wrench) {
    let load = spring.wrench(pose_a, pose_b, twist_a, twist_b);
    (load.on_a, load.on_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::quat::exp_map;
    use approx::assert_relative_eq;
    use nalgebra::{Translation3, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spring(stiffness: [f64; 6], damping: [f64; 6]) -> FrameSpring {
        FrameSpring {
            body_a: None,
            body_b: 0,
            attach_a: Pose::from_parts(Translation3::new(0.0, 0.0, 0.1), UnitQuaternion::identity()),
            attach_b: Pose::from_parts(Translation3::new(0.0, 0.0, -0.05), UnitQuaternion::identity()),
            rest: Pose::identity(),
            stiffness,
            damping,
        }
    }

    fn body_b_rest() -> Pose {
        Pose::from_parts(Translation3::new(0.0, 0.0, 0.15), UnitQuaternion::identity())
    }

    #[test]
    fn zero_wrench_at_rest() {
        let s = spring([100.0; 6], [1.0; 6]);
        let (a, b) = spring_wrench(&s, &Pose::identity(), &body_b_rest(), &Twist::zero(), &Twist::zero());
        // 0.15 - 0.05 is not exactly 0.1 in binary
        assert!(a.force.norm() + a.moment.norm() + b.force.norm() + b.moment.norm() < 1e-12);
    }

    #[test]
    fn pure_rotation_linear_law() {
        let s = spring([0.0, 0.0, 0.0, 10.0, 10.0, 10.0], [0.0; 6]);
        for axis in [Vector3::x_axis(), Vector3::y_axis(), Vector3::z_axis()] {
            // rotate B about its own attachment point
            let rot = UnitQuaternion::from_axis_angle(&axis, 0.1);
            let attach_world = Vector3::new(0.0, 0.0, 0.1);
            let center = attach_world + rot * Vector3::new(0.0, 0.0, 0.05);
            let pose_b = Pose::from_parts(Translation3::from(center), rot);
            let (on_a, on_b) = spring_wrench(&s, &Pose::identity(), &pose_b, &Twist::zero(), &Twist::zero());
            assert_relative_eq!(on_b.moment.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(on_b.moment.dot(&axis), -1.0, epsilon = 1e-12);
            assert_eq!(on_a.moment, -on_b.moment);
            assert_relative_eq!(on_b.force.norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn wrench_is_energy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = spring([300.0, 500.0, 2000.0, 7.0, 13.0, 21.0], [0.0; 6]);
        let chain_link = FrameSpring {
            body_a: Some(0),
            body_b: 1,
            attach_a: s.attach_a,
            attach_b: s.attach_b,
            rest: Pose::from_parts(
                Translation3::new(0.01, -0.02, 0.0),
                UnitQuaternion::from_euler_angles(0.05, 0.0, -0.03),
            ),
            ..s.clone()
        };
        for _ in 0..20 {
            let mut rand_pose = |base: Vector3<f64>| {
                let t = base + Vector3::from_fn(|_, _| rng.random_range(-0.03..0.03));
                let r = exp_map(&Vector3::from_fn(|_, _| rng.random_range(-0.6..0.6)));
                Pose::from_parts(Translation3::from(t), r)
            };
            let pa = rand_pose(Vector3::zeros());
            let pb = rand_pose(Vector3::new(0.0, 0.0, 0.15));
            let load = chain_link.wrench(&pa, &pb, &Twist::zero(), &Twist::zero());
            let h = 1e-6;
            for (pose, wrench, which) in [(pa, load.on_a, 0), (pb, load.on_b, 1)] {
                let center = pose.translation.vector;
                let torque = wrench.moment_about(&load.point, &center);
                let energy_with = |p: Pose| {
                    if which == 0 {
                        chain_link.energy(&p, &pb)
                    } else {
                        chain_link.energy(&pa, &p)
                    }
                };
                for k in 0..3 {
                    let mut d = Vector3::zeros();
                    d[k] = h;
                    let shifted = |delta: Vector3<f64>| {
                        Pose::from_parts(Translation3::from(center + delta), pose.rotation)
                    };
                    let grad_t = (energy_with(shifted(d)) - energy_with(shifted(-d))) / (2.0 * h);
                    let rotated = |delta: Vector3<f64>| {
                        Pose::from_parts(Translation3::from(center), exp_map(&delta) * pose.rotation)
                    };
                    let grad_r = (energy_with(rotated(d)) - energy_with(rotated(-d))) / (2.0 * h);
                    let scale_f = wrench.force.norm().max(1e-3);
                    let scale_t = torque.norm().max(1e-3);
                    assert!((-grad_t - wrench.force[k]).abs() / scale_f < 1e-6, "force {k}");
                    assert!((-grad_r - torque[k]).abs() / scale_t < 1e-6, "torque {k}");
                }
            }
        }
    }

    #[test]
    fn damping_dissipates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = spring([0.0; 6], [50.0, 60.0, 70.0, 1.0, 2.0, 3.0]);
        let pb = body_b_rest();
        for _ in 0..50 {
            let tw = Twist {
                linear: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                angular: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
            };
            let load = s.wrench(&Pose::identity(), &pb, &Twist::zero(), &tw);
            let v_point = tw.point_velocity(&pb.translation.vector, &load.point);
            let power = load.on_b.force.dot(&v_point) + load.on_b.moment.dot(&tw.angular);
            assert!(power <= 0.0);
        }
    }
}
