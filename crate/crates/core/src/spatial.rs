//! Rotations and angular-rate maps for the platform attitude.
//!
//! Attitude is parametrised by roll/pitch/yaw applied extrinsically in the
//! order X, Y, Z, i.e. `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.

use nalgebra::{Matrix3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pitch magnitude at which the Euler-rate map is considered singular.
pub const GIMBAL_MARGIN: f64 = 1e-6;

/// Orthonormal rotation matrix with unit determinant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation3<T: Real>(Matrix3<T>);

impl<T: Real> Rotation3<T> {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Rotation by `angle` about `axis` (need not be normalised).
    pub fn about_axis(axis: &Vector3<T>, angle: T) -> Self {
        let r = nalgebra::Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self(*r.matrix())
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, rhs: &Self) -> Self {
        Self(self.0 * rhs.0)
    }

    pub fn apply(&self, v: &Vector3<T>) -> Vector3<T> {
        self.0 * v
    }

    /// Re-express a body-frame inertia tensor in the world frame.
    pub fn rotate_inertia(&self, inertia: &Matrix3<T>) -> Matrix3<T> {
        self.0 * inertia * self.0.transpose()
    }
}

/// Maps roll/pitch/yaw rates to world-frame angular velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerRateMap<T: Real>(Matrix3<T>);

impl<T: Real> EulerRateMap<T> {
    pub fn matrix(&self) -> &Matrix3<T> {
        &self.0
    }

    pub fn angular_velocity(&self, rates: &Vector3<T>) -> Vector3<T> {
        self.0 * rates
    }

    /// Column `j` is the world-frame rotation axis associated with angle `j`.
    pub fn column(&self, j: usize) -> Vector3<T> {
        self.0.column(j).into_owned()
    }
}

/// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rot_rpy<T: Real>(roll: T, pitch: T, yaw: T) -> Rotation3<T> {
    let (sa, ca) = roll.sin_cos();
    let (sb, cb) = pitch.sin_cos();
    let (sg, cg) = yaw.sin_cos();
    Rotation3(Matrix3::new(
        cg * cb,
        cg * sb * sa - sg * ca,
        cg * sb * ca + sg * sa,
        sg * cb,
        sg * sb * sa + cg * ca,
        sg * sb * ca - cg * sa,
        -sb,
        cb * sa,
        cb * ca,
    ))
}

/// World-frame Euler-rate map `omega = E * [roll_dot, pitch_dot, yaw_dot]`.
///
/// For the X-Y-Z extrinsic convention the world-frame map depends on pitch
/// and yaw only; roll is accepted so callers can pass the attitude triple.
pub fn euler_rate_map<T: Real>(_roll: T, pitch: T, yaw: T) -> Result<EulerRateMap<T>> {
    check_pitch(pitch)?;
    let (sb, cb) = pitch.sin_cos();
    let (sg, cg) = yaw.sin_cos();
    let zero = T::zero();
    Ok(EulerRateMap(Matrix3::new(
        cb * cg,
        -sg,
        zero,
        cb * sg,
        cg,
        zero,
        -sb,
        zero,
        T::one(),
    )))
}

pub fn check_pitch<T: Real>(pitch: T) -> Result<()> {
    let limit = T::frac_pi_2() - T::lit(GIMBAL_MARGIN);
    if pitch.abs() >= limit || !pitch.is_finite() {
        return Err(Error::GimbalLock { pitch: pitch.as_f64() });
    }
    Ok(())
}

/// Cross-product matrix: `skew(a) * b == a x b`.
pub fn skew<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v.z, v.y, v.z, z, -v.x, -v.y, v.x, z)
}

/// Inverse of [`skew`] applied to the skew-symmetric part of `m`.
pub fn vee<T: Real>(m: &Matrix3<T>) -> Vector3<T> {
    let half = T::lit(0.5);
    Vector3::new(
        (m[(2, 1)] - m[(1, 2)]) * half,
        (m[(0, 2)] - m[(2, 0)]) * half,
        (m[(1, 0)] - m[(0, 1)]) * half,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn elementary(axis: usize, a: f64) -> Matrix3<f64> {
        let (s, c) = a.sin_cos();
        match axis {
            0 => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            1 => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            _ => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        }
    }

    #[test]
    fn zero_angles_give_identity() {
        assert_eq!(*rot_rpy(0.0, 0.0, 0.0).matrix(), Matrix3::identity());
        let e = euler_rate_map(0.0, 0.0, 0.0).unwrap();
        assert_eq!(*e.matrix(), Matrix3::identity());
    }

    #[test]
    fn quarter_yaw_maps_x_to_y() {
        let r = rot_rpy(0.0, 0.0, FRAC_PI_2);
        let v = r.apply(&Vector3::x());
        assert!((v - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn matches_elementary_composition() {
        let (a, b, g) = (0.3, -0.7, 1.9);
        let expected = elementary(2, g) * elementary(1, b) * elementary(0, a);
        assert!((rot_rpy(a, b, g).matrix() - expected).norm() < 1e-14);
        let na = nalgebra::Rotation3::from_euler_angles(a, b, g);
        assert!((rot_rpy(a, b, g).matrix() - na.matrix()).norm() < 1e-14);
    }

    #[test]
    fn gimbal_lock_rejected() {
        assert!(matches!(
            euler_rate_map(0.0, FRAC_PI_2, 0.0),
            Err(Error::GimbalLock { .. })
        ));
        assert!(euler_rate_map(0.0, -FRAC_PI_2 + 1e-7, 0.0).is_err());
        assert!(euler_rate_map(0.0, FRAC_PI_2 - 1e-5, 0.0).is_ok());
    }

    #[test]
    fn rate_map_matches_finite_difference_single_case() {
        let (a, b, g) = (0.3, 0.2, 0.0);
        let rates = Vector3::new(1.0, 0.0, 0.0);
        let omega = euler_rate_map(a, b, g).unwrap().angular_velocity(&rates);
        let h = 1e-7;
        let rp = rot_rpy(a + h, b, g);
        let rm = rot_rpy(a - h, b, g);
        let rdot = (rp.matrix() - rm.matrix()) / (2.0 * h);
        let fd = vee(&(rdot * rot_rpy(a, b, g).matrix().transpose()));
        assert!((omega - fd).norm() < 1e-6, "{omega} vs {fd}");
    }

    #[test]
    fn skew_vee_roundtrip() {
        let v = Vector3::new(1.0, -2.0, 0.5);
        assert_eq!(vee(&skew(&v)), v);
        let w = Vector3::new(0.1, 0.2, 0.3);
        assert!((skew(&v) * w - v.cross(&w)).norm() < 1e-15);
    }

    #[test]
    fn single_precision_rotation_is_orthonormal() {
        let r = rot_rpy(0.3f32, -0.2, 1.1);
        let err = (r.matrix() * r.matrix().transpose() - Matrix3::identity()).norm();
        assert!(err < 1e-5);
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal(a in -3.2f64..3.2, b in -3.2f64..3.2, g in -3.2f64..3.2) {
            let r = rot_rpy(a, b, g);
            let m = r.matrix();
            prop_assert!((m * m.transpose() - Matrix3::identity()).amax() < 1e-12);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rate_map_consistent_with_rotation_derivative(
            a in -1.0f64..1.0, b in -1.4f64..1.4, g in -3.0f64..3.0,
            da in -2.0f64..2.0, db in -2.0f64..2.0, dg in -2.0f64..2.0,
        ) {
            let rates = Vector3::new(da, db, dg);
            let omega = euler_rate_map(a, b, g).unwrap().angular_velocity(&rates);
            let h = 1e-7;
            let rp = rot_rpy(a + h * da, b + h * db, g + h * dg);
            let rm = rot_rpy(a - h * da, b - h * db, g - h * dg);
            let rdot = (rp.matrix() - rm.matrix()) / (2.0 * h);
            let fd = vee(&(rdot * rot_rpy(a, b, g).matrix().transpose()));
            prop_assert!((omega - fd).amax() < 1e-6);
        }
    }
}
