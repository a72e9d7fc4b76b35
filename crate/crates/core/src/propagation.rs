//! Coarse-to-fine trajectory over a sweep.
//!
//! [`integrate_imu`] builds a discrete set of knots, one per IMU sample, using
//! a constant-jerk / constant-angular-acceleration model between samples.
//! [`DiscreteTrajectory::query_pose`] then evaluates the same polynomials in
//! closed form at an arbitrary time inside the span, which is what makes
//! per-point deskewing cheap and trivially parallel.

use crate::error::{Error, Result};
use crate::geometry::{gravity, Pose, Quaternion, Vec3};
use crate::types::{ImuSample, RobotState};

/// State at one IMU sample, plus the motion model for the interval that
/// starts at it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryKnot {
    pub stamp: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub orientation: Quaternion,
    /// Gravity-free acceleration in the world frame at this knot.
    pub world_accel: Vec3,
    /// Jerk over `[this knot, next knot]`.
    pub jerk: Vec3,
    /// Bias-corrected body rate at this knot.
    pub body_gyro: Vec3,
    /// Angular acceleration over `[this knot, next knot]`.
    pub ang_accel: Vec3,
}

impl TrajectoryKnot {
    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.orientation)
    }

    /// Closed-form pose `tau` seconds after this knot.
    pub fn extrapolate(&self, tau: f64) -> Pose {
        if tau == 0.0 {
            return self.pose();
        }
        let tau2 = tau * tau;
        let position = self.position
            + self.velocity * tau
            + self.world_accel * (0.5 * tau2)
            + self.jerk * (tau2 * tau / 6.0);
        let q = self.orientation;
        let orientation = (q
            + (q * Quaternion::pure(&self.body_gyro)) * (0.5 * tau)
            + (q * Quaternion::pure(&self.ang_accel)) * (0.25 * tau2))
            .normalized();
        Pose::new(position, orientation)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteTrajectory {
    knots: Vec<TrajectoryKnot>,
}

impl DiscreteTrajectory {
    pub fn knots(&self) -> &[TrajectoryKnot] {
        &self.knots
    }

    pub fn start_stamp(&self) -> f64 {
        self.knots[0].stamp
    }

    pub fn end_stamp(&self) -> f64 {
        self.knots[self.knots.len() - 1].stamp
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_stamp() && t <= self.end_stamp()
    }

    /// Index of the last knot with `stamp <= t`. Caller ensures `t` is in span.
    fn preceding(&self, t: f64) -> usize {
        self.knots
            .partition_point(|k| k.stamp <= t)
            .saturating_sub(1)
    }

    fn check_span(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                t,
                start: self.start_stamp(),
                end: self.end_stamp(),
            })
        }
    }

    /// Continuous-time pose at `t`, from the closest preceding knot.
    pub fn query_pose(&self, t: f64) -> Result<Pose> {
        self.check_span(t)?;
        let k = &self.knots[self.preceding(t)];
        Ok(k.extrapolate(t - k.stamp))
    }

    /// Pose of the closest preceding knot, with no interpolation.
    pub fn knot_pose(&self, t: f64) -> Result<Pose> {
        self.check_span(t)?;
        Ok(self.knots[self.preceding(t)].pose())
    }

    /// Clamps `t` into the span.
    pub fn clamp(&self, t: f64) -> f64 {
        t.clamp(self.start_stamp(), self.end_stamp())
    }
}

/// Integrates bias-corrected IMU samples forward from `start`.
///
/// One knot is produced per sample. If `start.stamp` precedes the first
/// sample the start state is carried to that sample with a constant
/// acceleration step; normally the caller passes a state taken at the first
/// sample's stamp.
pub fn integrate_imu(start: &RobotState, samples: &[ImuSample]) -> Result<DiscreteTrajectory> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: samples.len(),
        });
    }
    if start.stamp > samples[0].stamp {
        return Err(Error::StartAfterSamples {
            state: start.stamp,
            sample: samples[0].stamp,
        });
    }
    for w in samples.windows(2) {
        if !(w[1].stamp > w[0].stamp) {
            return Err(Error::NonMonotonicStamp {
                previous: w[0].stamp,
                next: w[1].stamp,
            });
        }
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("IMU sample"));
    }

    let g = gravity();
    let accel_of = |s: &ImuSample| s.accel - start.accel_bias;
    let gyro_of = |s: &ImuSample| s.gyro - start.gyro_bias;

    let mut position = start.position;
    let mut velocity = start.velocity;
    let mut orientation = start.orientation.normalized();
    let lead = samples[0].stamp - start.stamp;
    if lead > 0.0 {
        let a = orientation.rotate(&accel_of(&samples[0])) + g;
        position += velocity * lead + a * (0.5 * lead * lead);
        velocity += a * lead;
        orientation = (orientation
            + (orientation * Quaternion::pure(&gyro_of(&samples[0]))) * (0.5 * lead))
            .normalized();
    }

    let mut knots = Vec::with_capacity(samples.len());
    knots.push(TrajectoryKnot {
        stamp: samples[0].stamp,
        position,
        velocity,
        orientation,
        world_accel: orientation.rotate(&accel_of(&samples[0])) + g,
        jerk: Vec3::zeros(),
        body_gyro: gyro_of(&samples[0]),
        ang_accel: Vec3::zeros(),
    });

    for s in &samples[1..] {
        let prev = knots.last_mut().expect("at least one knot");
        let dt = s.stamp - prev.stamp;
        let gyro = gyro_of(s);
        let ang_accel = (gyro - prev.body_gyro) / dt;

        let q = prev.orientation;
        let orientation = (q
            + (q * Quaternion::pure(&prev.body_gyro)) * (0.5 * dt)
            + (q * Quaternion::pure(&ang_accel)) * (0.25 * dt * dt))
            .normalized();
        let world_accel = orientation.rotate(&accel_of(s)) + g;
        let jerk = (world_accel - prev.world_accel) / dt;

        let position = prev.position
            + prev.velocity * dt
            + prev.world_accel * (0.5 * dt * dt)
            + jerk * (dt * dt * dt / 6.0);
        let velocity = prev.velocity + prev.world_accel * dt;

        prev.jerk = jerk;
        prev.ang_accel = ang_accel;
        knots.push(TrajectoryKnot {
            stamp: s.stamp,
            position,
            velocity,
            orientation,
            world_accel,
            // reused for the final knot, which has no forward interval
            jerk,
            body_gyro: gyro,
            ang_accel,
        });
    }

    Ok(DiscreteTrajectory { knots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn level_rest() -> Vec3 {
        -gravity()
    }

    fn stream(n: usize, rate: f64, accel: Vec3, gyro: Vec3) -> Vec<ImuSample> {
        (0..n)
            .map(|i| ImuSample::new(i as f64 / rate, accel, gyro))
            .collect()
    }

    #[test]
    fn stationary_knots_equal_start() {
        let start = RobotState {
            position: Vec3::new(1.0, 2.0, 3.0),
            ..Default::default()
        };
        let traj = integrate_imu(&start, &stream(11, 100.0, level_rest(), Vec3::zeros())).unwrap();
        for k in traj.knots() {
            assert_eq!(k.position, start.position);
            assert_eq!(k.orientation, Quaternion::identity());
            assert_eq!(k.velocity, Vec3::zeros());
        }
    }

    #[test]
    fn constant_accel_closed_form() {
        // body accel = world accel - g with identity attitude
        let a = Vec3::new(1.0, 0.0, 0.0);
        let traj = integrate_imu(
            &RobotState::default(),
            &stream(101, 100.0, a + level_rest(), Vec3::zeros()),
        )
        .unwrap();
        let last = traj.knots().last().unwrap();
        assert_relative_eq!(last.stamp, 1.0, epsilon = 1e-12);
        assert_relative_eq!(last.position.x, 0.5, epsilon = 1e-6);
        assert_relative_eq!(last.velocity.x, 1.0, epsilon = 1e-6);
        assert_relative_eq!(last.jerk.norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn constant_rate_matches_axis_angle() {
        let w = Vec3::new(0.0, 0.0, 1.0);
        let traj =
            integrate_imu(&RobotState::default(), &stream(101, 100.0, level_rest(), w)).unwrap();
        let q = traj.knots().last().unwrap().orientation;
        let expected = Quaternion::from_axis_angle(&Vec3::z(), 1.0);
        assert!(q.angle_to(&expected) < 1e-3);
    }

    #[test]
    fn biases_are_removed() {
        let ba = Vec3::new(0.1, -0.2, 0.05);
        let bg = Vec3::new(0.01, 0.02, -0.03);
        let start = RobotState {
            accel_bias: ba,
            gyro_bias: bg,
            ..Default::default()
        };
        let traj = integrate_imu(&start, &stream(21, 100.0, level_rest() + ba, bg)).unwrap();
        let last = traj.knots().last().unwrap();
        assert_relative_eq!(last.position.norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(last.orientation.angle(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let s = stream(1, 100.0, level_rest(), Vec3::zeros());
        assert!(matches!(
            integrate_imu(&RobotState::default(), &s),
            Err(Error::TooFewSamples { .. })
        ));
        let mut s = stream(3, 100.0, level_rest(), Vec3::zeros());
        s[2].stamp = s[1].stamp;
        assert!(matches!(
            integrate_imu(&RobotState::default(), &s),
            Err(Error::NonMonotonicStamp { .. })
        ));
        let s = stream(3, 100.0, level_rest(), Vec3::zeros());
        let late = RobotState {
            stamp: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            integrate_imu(&late, &s),
            Err(Error::StartAfterSamples { .. })
        ));
    }

    #[test]
    fn query_at_knot_is_exact() {
        let s: Vec<ImuSample> = (0..11)
            .map(|i| {
                let t = i as f64 * 0.01;
                ImuSample::new(t, Vec3::new(t.sin(), 0.3, 9.0), Vec3::new(0.1, t, -0.2))
            })
            .collect();
        let traj = integrate_imu(&RobotState::default(), &s).unwrap();
        for k in traj.knots() {
            let p = traj.query_pose(k.stamp).unwrap();
            assert_eq!(p.position, k.position);
            assert_eq!(p.orientation, k.orientation);
        }
    }

    #[test]
    fn query_linear_under_constant_velocity() {
        let start = RobotState {
            velocity: Vec3::new(2.0, -1.0, 0.5),
            ..Default::default()
        };
        let traj = integrate_imu(&start, &stream(11, 100.0, level_rest(), Vec3::zeros())).unwrap();
        let p = traj.query_pose(0.035).unwrap();
        assert_relative_eq!(p.position, start.velocity * 0.035, epsilon = 1e-12);
    }

    #[test]
    fn query_outside_span_is_error() {
        let traj = integrate_imu(
            &RobotState::default(),
            &stream(11, 100.0, level_rest(), Vec3::zeros()),
        )
        .unwrap();
        assert!(matches!(
            traj.query_pose(-0.001),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            traj.query_pose(0.1001),
            Err(Error::OutOfRange { .. })
        ));
        assert!(traj.query_pose(0.1).is_ok());
    }

    /// Independent oracle: semi-analytic fine-step integration of a constant
    /// world acceleration (exact trapezoid on velocity, 1 kHz).
    fn dense_constant_accel(p0: Vec3, v0: Vec3, a: Vec3, t: f64) -> Vec3 {
        let steps = (t * 1000.0).round() as usize;
        let h = t / steps as f64;
        let (mut p, mut v) = (p0, v0);
        for _ in 0..steps {
            let v_next = v + a * h;
            p += (v + v_next) * (0.5 * h);
            v = v_next;
        }
        p
    }

    #[test]
    fn query_matches_dense_integration_under_constant_accel() {
        let a = Vec3::new(0.7, -0.4, 0.2);
        let start = RobotState {
            position: Vec3::new(0.5, 0.0, 1.0),
            velocity: Vec3::new(1.0, 0.5, 0.0),
            ..Default::default()
        };
        let traj =
            integrate_imu(&start, &stream(11, 100.0, a + level_rest(), Vec3::zeros())).unwrap();
        let t = 0.055;
        let oracle = dense_constant_accel(start.position, start.velocity, a, t);
        let p = traj.query_pose(t).unwrap();
        assert!((p.position - oracle).norm() < 1e-5);
    }

    #[test]
    fn continuity_at_knots() {
        let s: Vec<ImuSample> = (0..11)
            .map(|i| {
                let t = i as f64 * 0.01;
                ImuSample::new(
                    t,
                    Vec3::new(2.0 * t, (5.0 * t).sin(), 9.81),
                    Vec3::new(0.3 * t, -1.0, 3.5),
                )
            })
            .collect();
        let traj = integrate_imu(&RobotState::default(), &s).unwrap();
        for w in traj.knots().windows(2) {
            let before = w[0].extrapolate(w[1].stamp - w[0].stamp);
            assert!((before.position - w[1].position).norm() < 1e-9);
            assert!((before.orientation + w[1].orientation * -1.0).norm() < 1e-9);
        }
    }
}

#[cfg(test)]
mod convergence {
    use super::*;
    use crate::simulator::{ground_truth_pose, sample_imu, SimNoiseSpec, TrajectorySpec};

    fn sweep_error(spec: &TrajectorySpec, rate: f64, t0: f64) -> f64 {
        let imu = sample_imu(spec, rate, &SimNoiseSpec::noiseless()).unwrap();
        let t1 = t0 + 0.1;
        let a = imu.iter().rposition(|s| s.stamp <= t0 + 1e-12).unwrap();
        let c = imu.iter().position(|s| s.stamp >= t1 - 1e-12).unwrap();
        let k = spec.kinematics(imu[a].stamp);
        let start = RobotState {
            stamp: imu[a].stamp,
            velocity: k.velocity,
            ..RobotState::default()
        }
        .with_pose(&k.pose);
        let traj = integrate_imu(&start, &imu[a..=c]).unwrap();
        (0..=50)
            .map(|j| {
                let t = t0 + 0.1 * j as f64 / 50.0;
                traj.query_pose(t)
                    .unwrap()
                    .translation_distance(&ground_truth_pose(spec, t))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn error_shrinks_as_rate_doubles() {
        let spec = TrajectorySpec::aggressive_spin(8.0);
        for t0 in [3.0, 5.5] {
            let errs: Vec<f64> = [100.0, 200.0, 400.0]
                .iter()
                .map(|&r| sweep_error(&spec, r, t0))
                .collect();
            assert!(errs[0] < 1e-4, "{errs:?}");
            assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
        }
    }
}
