use nalgebra::{DVector, UnitQuaternion};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::quat::{canonical, fraction_of};

/// Symmetric angle ranges, degrees, for the rotation of the top body:
/// flexion/extension about x, lateral bending about y, axial about z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetDomain {
    pub flexion_deg: f64,
    pub lateral_deg: f64,
    pub axial_deg: f64,
}

impl Default for TargetDomain {
    fn default() -> Self {
        Self {
            flexion_deg: 30.0,
            lateral_deg: 20.0,
            axial_deg: 10.0,
        }
    }
}

impl TargetDomain {
    /// Whether `q` (as z-y-x Euler angles) lies inside the domain.
    pub fn contains(&self, q: &UnitQuaternion<f64>, slack_deg: f64) -> bool {
        let (x, y, z) = q.euler_angles();
        x.to_degrees().abs() <= self.flexion_deg + slack_deg
            && y.to_degrees().abs() <= self.lateral_deg + slack_deg
            && z.to_degrees().abs() <= self.axial_deg + slack_deg
    }
}

/// Desired orientation of every body, bottom to top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub orientations: Vec<UnitQuaternion<f64>>,
}

impl TargetSpec {
    pub fn num_bodies(&self) -> usize {
        self.orientations.len()
    }

    /// Stacked canonical `[w, x, y, z]` blocks.
    pub fn feature(&self) -> DVector<f64> {
        let mut u = DVector::zeros(4 * self.orientations.len());
        for (i, q) in self.orientations.iter().enumerate() {
            let q = canonical(*q);
            u[4 * i] = q.w;
            u[4 * i + 1] = q.i;
            u[4 * i + 2] = q.j;
            u[4 * i + 3] = q.k;
        }
        u
    }
}

/// Spread a top-body rotation down the chain: body `k` (0 = bottom) of `n`
/// receives the fraction `(k + 1) / n` of it.
pub fn target_from_top(top: UnitQuaternion<f64>, n: usize) -> TargetSpec {
    TargetSpec {
        orientations: (0..n).map(|k| fraction_of(&top, (k + 1) as f64 / n as f64)).collect(),
    }
}

pub fn sample_target(rng: &mut impl Rng, num_bodies: usize, domain: &TargetDomain) -> TargetSpec {
    let mut draw = |limit: f64| {
        if limit > 0.0 {
            rng.random_range(-limit..=limit).to_radians()
        } else {
            0.0
        }
    };
    let x = draw(domain.flexion_deg);
    let y = draw(domain.lateral_deg);
    let z = draw(domain.axial_deg);
    target_from_top(UnitQuaternion::from_euler_angles(x, y, z), num_bodies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::quat::geodesic_angle;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_top_gives_identity_targets() {
        let t = target_from_top(UnitQuaternion::identity(), 5);
        assert!(t.orientations.iter().all(|q| q.angle() == 0.0));
    }

    #[test]
    fn fractions_follow_the_chain() {
        let top = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 25f64.to_radians());
        let t = target_from_top(top, 5);
        assert_relative_eq!(t.orientations[3].angle().to_degrees(), 20.0, epsilon = 1e-12);
        assert_relative_eq!(t.orientations[0].angle().to_degrees(), 5.0, epsilon = 1e-12);
        assert_relative_eq!(geodesic_angle(&t.orientations[4], &top), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn samples_stay_in_domain() {
        let domain = TargetDomain::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let t = sample_target(&mut rng, 3, &domain);
            let top = t.orientations.last().unwrap();
            assert!(domain.contains(top, 1e-9));
            let f = t.feature();
            for b in 0..3 {
                assert!(f[4 * b] >= 0.0);
                assert_relative_eq!(f.rows(4 * b, 4).norm(), 1.0, epsilon = 1e-12);
            }
        }
    }
}
