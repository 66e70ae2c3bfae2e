//! Rotation helpers on top of `nalgebra` unit quaternions.
//!
//! Orientations are kept in the canonical hemisphere (`w >= 0`) so that the
//! stacked quaternion features used by the tracker and the environment are
//! single-valued.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

/// Flip `q` into the `w >= 0` hemisphere.
pub fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

/// Renormalize and canonicalize.
pub fn renormalize(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    canonical(UnitQuaternion::new_normalize(q))
}

/// Flip `q` onto the hemisphere of `reference` (as 4-vectors).
pub fn align_to(q: UnitQuaternion<f64>, reference: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.coords.dot(&reference.coords) < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

/// Rotation vector (axis * angle) of `q`, angle in `[0, pi]`.
pub fn log_map(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = canonical(*q);
    let v = q.imag();
    let s = v.norm();
    if s < 1e-12 {
        // first-order: angle ~ 2 s, axis ~ v / s
        return v * (2.0 / q.w.max(1e-300));
    }
    let angle = 2.0 * s.atan2(q.w);
    v * (angle / s)
}

/// Unit quaternion from a rotation vector.
pub fn exp_map(phi: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*phi)
}

/// Skew-symmetric cross-product matrix.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse right Jacobian of SO(3): `log(exp(phi) exp(d)) ~ phi + Jr^-1(phi) d`.
pub fn inv_right_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    let coeff = if theta < 1e-4 {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() + 0.5 * k + coeff * k * k
}

/// Geodesic angle between two orientations, radians, in `[0, pi]`.
pub fn geodesic_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let (a, b) = (a.coords, b.coords);
    let b = if a.dot(&b) < 0.0 { -b } else { b };
    4.0 * (a - b).norm().atan2((a + b).norm())
}

/// Quaternion stored as `[w, x, y, z]` at `offset` of a feature vector.
pub fn from_block(u: &[f64], offset: usize) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(u[offset], u[offset + 1], u[offset + 2], u[offset + 3]))
}

/// Sum over the first `num_bodies` quaternion blocks of the geodesic angle
/// between `u` and `target`, radians.
pub fn summed_angle(u: &[f64], target: &[f64], num_bodies: usize) -> f64 {
    (0..num_bodies)
        .map(|b| geodesic_angle(&from_block(u, 4 * b), &from_block(target, 4 * b)))
        .sum()
}

/// Spherical interpolation from identity toward `q` by `fraction`.
pub fn fraction_of(q: &UnitQuaternion<f64>, fraction: f64) -> UnitQuaternion<f64> {
    canonical(exp_map(&(log_map(q) * fraction)))
}
