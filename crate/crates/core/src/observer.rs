//! Hierarchical nonlinear geometric observer.
//!
//! IMU samples propagate the state at high rate; each registered scan pose
//! corrects it. The attitude block (orientation, gyro bias) is driven only by
//! the rotation error, and the translation block (position, velocity, accel
//! bias) only by the position error, so the two loops are decoupled.

use crate::error::{Error, Result};
use crate::geometry::{gravity, Pose, Quaternion, Vec3};
use crate::types::{ImuSample, RobotState};

/// Observer gains `gamma_1..gamma_5`.
///
/// The defaults place both error loops at a repeated pole of `-2 /s`:
/// attitude `s^2 + g1 s + g2/2` and translation `s^3 + g3 s^2 + g4 s + g5`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObserverGains {
    /// Orientation correction.
    pub gamma1: f64,
    /// Gyro bias correction.
    pub gamma2: f64,
    /// Position correction.
    pub gamma3: f64,
    /// Velocity correction.
    pub gamma4: f64,
    /// Accelerometer bias correction.
    pub gamma5: f64,
}

impl Default for ObserverGains {
    fn default() -> Self {
        Self {
            gamma1: 4.0,
            gamma2: 8.0,
            gamma3: 6.0,
            gamma4: 12.0,
            gamma5: 8.0,
        }
    }
}

impl ObserverGains {
    pub fn unit() -> Self {
        Self {
            gamma1: 1.0,
            gamma2: 1.0,
            gamma3: 1.0,
            gamma4: 1.0,
            gamma5: 1.0,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.gamma1,
            self.gamma2,
            self.gamma3,
            self.gamma4,
            self.gamma5,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.as_array().iter().enumerate() {
            if !(*g > 0.0) || !g.is_finite() {
                return Err(Error::invalid(
                    format!("observer.gamma{}", i + 1),
                    "must be strictly positive",
                ));
            }
        }
        Ok(())
    }
}

/// Error between a propagated and a measured pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseError {
    /// `conj(q_propagated) * q_measured`.
    pub q_e: Quaternion,
    /// `p_measured - p_propagated`.
    pub p_e: Vec3,
}

impl PoseError {
    pub fn is_zero(&self) -> bool {
        self.p_e == Vec3::zeros() && self.q_e.vector() == Vec3::zeros()
    }
}

/// One IMU step of strapdown kinematics using bias-corrected measurements.
/// Biases are left unchanged.
pub fn propagate(state: &RobotState, sample: &ImuSample, dt: f64) -> Result<RobotState> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let omega = sample.gyro - state.gyro_bias;
    let accel = state.orientation.rotate(&(sample.accel - state.accel_bias)) + gravity();
    let q = state.orientation;
    Ok(RobotState {
        position: state.position + state.velocity * dt + accel * (0.5 * dt * dt),
        velocity: state.velocity + accel * dt,
        orientation: (q + (q * Quaternion::pure(&omega)) * (0.5 * dt)).normalized(),
        stamp: state.stamp + dt,
        ..*state
    })
}

pub fn compute_error(propagated: &Pose, measured: &Pose) -> PoseError {
    PoseError {
        q_e: propagated.orientation.conjugate() * measured.orientation,
        p_e: measured.position - propagated.position,
    }
}

/// Corrects `state` with a measured pose taken at the same time.
/// `dt_k` is the time since the previous correction.
pub fn update(
    state: &RobotState,
    measured: &Pose,
    dt_k: f64,
    gains: &ObserverGains,
) -> Result<RobotState> {
    let err = compute_error(&state.pose(), measured);
    update_with_error(state, &err, dt_k, gains)
}

pub fn update_with_error(
    state: &RobotState,
    err: &PoseError,
    dt_k: f64,
    gains: &ObserverGains,
) -> Result<RobotState> {
    if !(dt_k > 0.0) {
        return Err(Error::invalid("dt_k", format!("must be > 0, got {dt_k}")));
    }
    let qw = err.q_e.w;
    let sign = if qw >= 0.0 { 1.0 } else { -1.0 };
    let qv = err.q_e.vector();

    // attitude block
    let correction = Quaternion::new(1.0 - qw.abs(), sign * qv.x, sign * qv.y, sign * qv.z);
    let q = state.orientation;
    let orientation = (q + (q * correction) * (dt_k * gains.gamma1)).normalized();
    let gyro_bias = state.gyro_bias - qv * (dt_k * gains.gamma2 * qw);

    // translation block
    let position = state.position + err.p_e * (dt_k * gains.gamma3);
    let velocity = state.velocity + err.p_e * (dt_k * gains.gamma4);
    let accel_bias = state.accel_bias - q.conjugate().rotate(&err.p_e) * (dt_k * gains.gamma5);

    Ok(RobotState {
        position,
        orientation,
        velocity,
        accel_bias,
        gyro_bias,
        stamp: state.stamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state() -> RobotState {
        RobotState {
            position: Vec3::new(1.0, 2.0, 3.0),
            orientation: Quaternion::from_euler(0.1, -0.2, 0.8),
            velocity: Vec3::new(0.5, 0.0, -0.1),
            accel_bias: Vec3::new(0.01, 0.02, 0.03),
            gyro_bias: Vec3::new(-0.001, 0.002, 0.0),
            stamp: 4.0,
        }
    }

    #[test]
    fn stationary_propagation_is_identity() {
        let s = RobotState::default();
        let imu = ImuSample::new(0.0, -gravity(), Vec3::zeros());
        let next = propagate(&s, &imu, 0.01).unwrap();
        assert_eq!(next.position, s.position);
        assert_eq!(next.velocity, s.velocity);
        assert_eq!(next.orientation, s.orientation);
        assert_relative_eq!(next.stamp, 0.01);
    }

    #[test]
    fn constant_accel_velocity() {
        let mut s = RobotState::default();
        let imu = ImuSample::new(0.0, Vec3::new(1.0, 0.0, 0.0) - gravity(), Vec3::zeros());
        for _ in 0..100 {
            s = propagate(&s, &imu, 0.01).unwrap();
        }
        assert_relative_eq!(s.velocity.x, 1.0, epsilon = 1e-6);
        assert_relative_eq!(s.position.x, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn propagate_rejects_nonpositive_dt() {
        let imu = ImuSample::new(0.0, Vec3::zeros(), Vec3::zeros());
        assert!(propagate(&RobotState::default(), &imu, 0.0).is_err());
    }

    #[test]
    fn error_of_identical_poses_is_zero() {
        let p = state().pose();
        let e = compute_error(&p, &p);
        assert_relative_eq!(e.q_e.w, 1.0, epsilon = 1e-15);
        assert_relative_eq!(e.q_e.vector().norm(), 0.0, epsilon = 1e-15);
        assert_eq!(e.p_e, Vec3::zeros());
    }

    #[test]
    fn yaw_error_is_relative_rotation() {
        let prop = Pose::from_rotation(Quaternion::from_euler(0.0, 0.0, 0.3));
        let meas = Pose::from_rotation(Quaternion::from_euler(0.0, 0.0, 0.3 + 10f64.to_radians()));
        let e = compute_error(&prop, &meas);
        let expected = Quaternion::from_axis_angle(&Vec3::z(), 10f64.to_radians());
        assert!((e.q_e + expected * -1.0).norm() < 1e-12);
    }

    #[test]
    fn zero_error_update_is_identity() {
        let s = state();
        let next = update(&s, &s.pose(), 0.1, &ObserverGains::default()).unwrap();
        assert_eq!(next.position, s.position);
        assert_eq!(next.velocity, s.velocity);
        assert_eq!(next.accel_bias, s.accel_bias);
        assert_relative_eq!(next.gyro_bias, s.gyro_bias, epsilon = 1e-18);
        assert!((next.orientation + s.orientation * -1.0).norm() < 1e-15);
    }

    #[test]
    fn unit_gain_position_error_substitution() {
        let s = RobotState::default();
        let measured = Pose::from_translation(Vec3::new(1.0, 0.0, 0.0));
        let next = update(&s, &measured, 0.1, &ObserverGains::unit()).unwrap();
        assert_relative_eq!(next.position, Vec3::new(0.1, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(next.velocity, Vec3::new(0.1, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(next.accel_bias, Vec3::new(-0.1, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(next.orientation, Quaternion::identity());
        assert_eq!(next.gyro_bias, Vec3::zeros());
    }

    #[test]
    fn measured_sign_flip_is_harmless() {
        let s = state();
        let meas = Pose::new(
            Vec3::new(1.2, 1.9, 3.05),
            Quaternion::from_euler(0.15, -0.25, 0.9),
        );
        let flipped = Pose::new(meas.position, -meas.orientation);
        let g = ObserverGains::default();
        let a = update(&s, &meas, 0.1, &g).unwrap();
        let b = update(&s, &flipped, 0.1, &g).unwrap();
        assert!((a.orientation + b.orientation * -1.0).norm() < 1e-15);
        assert_relative_eq!(a.gyro_bias, b.gyro_bias, epsilon = 1e-15);
        assert_eq!(a.position, b.position);
    }

    #[test]
    fn blocks_are_decoupled() {
        let s = state();
        let g = ObserverGains::default();
        // pure position error leaves the attitude block untouched
        let shifted = Pose::new(s.position + Vec3::new(0.3, -0.2, 0.1), s.orientation);
        let a = update(&s, &shifted, 0.1, &g).unwrap();
        assert!((a.orientation + s.orientation * -1.0).norm() < 1e-15);
        assert_relative_eq!(a.gyro_bias, s.gyro_bias, epsilon = 1e-18);
        // pure rotation error leaves position and velocity untouched
        let turned = Pose::new(
            s.position,
            s.orientation * Quaternion::from_euler(0.05, 0.0, -0.1),
        );
        let b = update(&s, &turned, 0.1, &g).unwrap();
        assert_eq!(b.position, s.position);
        assert_eq!(b.velocity, s.velocity);
        assert_eq!(b.accel_bias, s.accel_bias);
    }

    #[test]
    fn gains_must_be_positive() {
        let mut g = ObserverGains::default();
        assert!(g.validate().is_ok());
        g.gamma4 = 0.0;
        assert!(g.validate().is_err());
    }
}
