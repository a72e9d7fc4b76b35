//! Rotation and rigid-transform primitives.
//!
//! Quaternions follow the Hamilton convention and are stored `(w, x, y, z)`.
//! Vectors are plain `nalgebra::Vector3<f64>`.

use std::ops::{Add, Mul, Neg};

use nalgebra::{Matrix3, Matrix4, Vector3};

pub type Vec3 = Vector3<f64>;

/// Standard gravity, world frame z-up.
pub const GRAVITY_MAGNITUDE: f64 = 9.80665;

/// Gravity vector expressed in the world frame.
pub fn gravity() -> Vec3 {
    Vec3::new(0.0, 0.0, -GRAVITY_MAGNITUDE)
}

/// Skew-symmetric matrix such that `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// Pure quaternion `(0, v)`.
    pub fn pure(v: &Vec3) -> Self {
        Self::new(0.0, v.x, v.y, v.z)
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    /// Inverse of a unit quaternion.
    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let a = axis.normalize();
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, a.x * s, a.y * s, a.z * s)
    }

    /// Exponential map from a rotation vector (axis * angle).
    pub fn from_rotation_vector(rv: &Vec3) -> Self {
        let angle = rv.norm();
        if angle < 1e-12 {
            // second-order expansion, then renormalize
            return Self::new(1.0, 0.5 * rv.x, 0.5 * rv.y, 0.5 * rv.z).normalized();
        }
        Self::from_axis_angle(rv, angle)
    }

    /// Logarithm map, returning the rotation vector with angle in `[0, pi]`.
    pub fn to_rotation_vector(&self) -> Vec3 {
        let q = if self.w < 0.0 { -*self } else { *self };
        let v = q.vector();
        let s = v.norm();
        if s < 1e-12 {
            return 2.0 * v;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let s = self.vector().norm();
        2.0 * s.atan2(self.w.abs())
    }

    /// Angle of the relative rotation between two orientations.
    pub fn angle_to(&self, other: &Self) -> f64 {
        (self.conjugate() * *other).angle()
    }

    /// Z-Y-X (yaw, pitch, roll) Euler angles.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let qz = Self::from_axis_angle(&Vec3::z(), yaw);
        let qy = Self::from_axis_angle(&Vec3::y(), pitch);
        let qx = Self::from_axis_angle(&Vec3::x(), roll);
        qz * qy * qx
    }

    /// Returns `(roll, pitch, yaw)`.
    pub fn to_euler(&self) -> (f64, f64, f64) {
        let m = self.to_rotation_matrix();
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        (roll, pitch, yaw)
    }

    /// Rotates `v` by this (unit) quaternion.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        // v' = v + 2w (u x v) + 2 u x (u x v)
        let u = self.vector();
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let Self { w, x, y, z } = *self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Shepperd's method; the result has non-negative scalar part when the
    /// trace dominates.
    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Self {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if trace > 0.0 {
            let s = 2.0 * (trace + 1.0).sqrt();
            Self::new(
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
            Self::new(
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
            Self::new(
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
            Self::new(
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        q.normalized()
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product.
    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;

    fn mul(self, s: f64) -> Quaternion {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;

    fn add(self, b: Quaternion) -> Quaternion {
        Quaternion::new(self.w + b.w, self.x + b.x, self.y + b.y, self.z + b.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Rigid transform: rotate by `orientation`, then translate by `position`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quaternion,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quaternion) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Vec3::zeros(), Quaternion::identity())
    }

    pub fn from_translation(position: Vec3) -> Self {
        Self::new(position, Quaternion::identity())
    }

    pub fn from_rotation(orientation: Quaternion) -> Self {
        Self::new(Vec3::zeros(), orientation)
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.orientation.rotate(&other.position) + self.position,
            (self.orientation * other.orientation).normalized(),
        )
    }

    pub fn inverse(&self) -> Pose {
        let q = self.orientation.conjugate();
        Pose::new(-q.rotate(&self.position), q)
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.orientation.rotate(p) + self.position
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix()
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Pose {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
        let t: Vec3 = m.fixed_view::<3, 1>(0, 3).into();
        Pose::new(t, Quaternion::from_rotation_matrix(&r))
    }

    /// Exponential map of a twist `(rho, phi)` in the decoupled
    /// (translation, rotation-vector) parameterization.
    pub fn from_increment(translation: &Vec3, rotation: &Vec3) -> Pose {
        Pose::new(*translation, Quaternion::from_rotation_vector(rotation))
    }

    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.position - other.position).norm()
    }

    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        self.orientation.angle_to(&other.orientation)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite()) && self.orientation.is_finite()
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    /// Independent oracle: rotation matrix from axis-angle via Rodrigues.
    fn rodrigues(axis: &Vec3, angle: f64) -> Matrix3<f64> {
        let k = axis.normalize();
        let kx = skew(&k);
        Matrix3::identity() + angle.sin() * kx + (1.0 - angle.cos()) * kx * kx
    }

    fn quat_strategy() -> impl Strategy<Value = Quaternion> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(w, x, y, z)| {
                w * w + x * x + y * y + z * z > 1e-3
            })
            .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z).normalized())
    }

    fn vec_strategy(scale: f64) -> impl Strategy<Value = Vec3> {
        (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn pose_strategy() -> impl Strategy<Value = Pose> {
        (vec_strategy(10.0), quat_strategy()).prop_map(|(p, q)| Pose::new(p, q))
    }

    #[test]
    fn identity_product() {
        let q = Quaternion::new(0.3, -0.4, 0.5, 0.1).normalized();
        assert_eq!(Quaternion::identity() * q, q);
        let r = q * q.inverse();
        assert_relative_eq!(r.w, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.vector().norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quarter_turns_compose_to_half_turn() {
        let q = Quaternion::from_axis_angle(&Vec3::z(), FRAC_PI_2);
        let h = q * q;
        assert_relative_eq!(h.w, 0.0, epsilon = 1e-15);
        assert_relative_eq!(h.z, 1.0, epsilon = 1e-15);
        // matrix route
        let m = rodrigues(&Vec3::z(), FRAC_PI_2) * rodrigues(&Vec3::z(), FRAC_PI_2);
        assert_relative_eq!(h.to_rotation_matrix(), m, epsilon = 1e-15);
    }

    #[test]
    fn rotate_axes() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(Quaternion::identity().rotate(&v), v);
        let q = Quaternion::from_axis_angle(&Vec3::z(), FRAC_PI_2);
        assert_relative_eq!(q.rotate(&Vec3::x()), Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn euler_roundtrip() {
        let q = Quaternion::from_euler(0.1, -0.2, 2.5);
        let (r, p, y) = q.to_euler();
        assert_relative_eq!(r, 0.1, epsilon = 1e-12);
        assert_relative_eq!(p, -0.2, epsilon = 1e-12);
        assert_relative_eq!(y, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn pose_inverse_is_identity() {
        let p = Pose::new(
            Vec3::new(1.0, -2.0, 0.5),
            Quaternion::from_euler(0.3, 0.2, -1.0),
        );
        let i = p * p.inverse();
        assert_relative_eq!(i.position, Vec3::zeros(), epsilon = 1e-14);
        assert_relative_eq!(i.orientation.angle(), 0.0, epsilon = 1e-7);
        assert_eq!(
            Pose::identity() * p,
            Pose::new(p.position, p.orientation.normalized())
        );
    }

    proptest! {
        #[test]
        fn rotate_matches_axis_angle_matrix(axis in vec_strategy(1.0), angle in -3.1..3.1f64, v in vec_strategy(5.0)) {
            prop_assume!(axis.norm() > 1e-3);
            let q = Quaternion::from_axis_angle(&axis, angle);
            let expected = rodrigues(&axis, angle) * v;
            prop_assert!((q.rotate(&v) - expected).norm() < 1e-12);
        }

        #[test]
        fn rotate_matches_matrix(q in quat_strategy(), v in vec_strategy(5.0)) {
            let expected = q.to_rotation_matrix() * v;
            prop_assert!((q.rotate(&v) - expected).norm() < 1e-12);
        }

        #[test]
        fn rotation_preserves_norm(q in quat_strategy(), v in vec_strategy(10.0)) {
            prop_assert!((q.rotate(&v).norm() - v.norm()).abs() < 1e-12);
        }

        #[test]
        fn double_cover(q in quat_strategy()) {
            let d = (q.to_rotation_matrix() - (-q).to_rotation_matrix()).abs().max();
            prop_assert!(d < 1e-12);
        }

        #[test]
        fn normalize_is_unit(w in -5.0..5.0f64, x in -5.0..5.0f64, y in -5.0..5.0f64, z in -5.0..5.0f64) {
            let q = Quaternion::new(w, x, y, z);
            prop_assume!(q.norm() > 1e-6);
            prop_assert!((q.normalized().norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn matrix_roundtrip(q in quat_strategy()) {
            let back = Quaternion::from_rotation_matrix(&q.to_rotation_matrix());
            let err = (back + q * -1.0).norm().min((back + q).norm());
            prop_assert!(err < 1e-10);
        }

        #[test]
        fn rotation_vector_roundtrip(rv in vec_strategy(1.7)) {
            let back = Quaternion::from_rotation_vector(&rv).to_rotation_vector();
            prop_assert!((back - rv).norm() < 1e-10);
        }

        #[test]
        fn compose_matches_homogeneous_product(a in pose_strategy(), b in pose_strategy()) {
            let m = a.to_matrix() * b.to_matrix();
            prop_assert!(((a * b).to_matrix() - m).abs().max() < 1e-12);
        }

        #[test]
        fn compose_is_associative(a in pose_strategy(), b in pose_strategy(), c in pose_strategy()) {
            let l = (a * b) * c;
            let r = a * (b * c);
            prop_assert!((l.position - r.position).norm() < 1e-10);
            prop_assert!(l.orientation.angle_to(&r.orientation) < 1e-7);
            prop_assert!((l.to_matrix() - r.to_matrix()).abs().max() < 1e-10);
        }

        #[test]
        fn pose_matrix_roundtrip(p in pose_strategy()) {
            let back = Pose::from_matrix(&p.to_matrix());
            prop_assert!((back.to_matrix() - p.to_matrix()).abs().max() < 1e-12);
        }
    }
}
