//! State and measurement types shared by every stage of the pipeline.

use crate::geometry::{Pose, Quaternion, Vec3};

/// Full navigation state: pose, velocity and IMU biases in the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub position: Vec3,
    pub orientation: Quaternion,
    pub velocity: Vec3,
    pub accel_bias: Vec3,
    pub gyro_bias: Vec3,
    pub stamp: f64,
}

impl Default for RobotState {
    fn default() -> Self {
        Self {
            position: Vec3::zeros(),
            orientation: Quaternion::identity(),
            velocity: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
            gyro_bias: Vec3::zeros(),
            stamp: 0.0,
        }
    }
}

impl RobotState {
    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.orientation)
    }

    pub fn with_pose(mut self, pose: &Pose) -> Self {
        self.position = pose.position;
        self.orientation = pose.orientation;
        self
    }
}

/// Raw (or compensated) 6-axis IMU measurement.
///
/// `accel` is specific force, i.e. it contains `-g` when at rest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub stamp: f64,
    pub accel: Vec3,
    pub gyro: Vec3,
}

impl ImuSample {
    pub fn new(stamp: f64, accel: Vec3, gyro: Vec3) -> Self {
        Self { stamp, accel, gyro }
    }

    pub fn is_finite(&self) -> bool {
        self.stamp.is_finite()
            && self.accel.iter().all(|v| v.is_finite())
            && self.gyro.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimedPoint {
    pub xyz: Vec3,
    /// Offset from the sweep start, seconds.
    pub dt: f64,
}

impl TimedPoint {
    pub fn new(xyz: Vec3, dt: f64) -> Self {
        Self { xyz, dt }
    }
}

/// One LiDAR sweep. Points are kept sorted by `dt`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimedPointCloud {
    /// Sweep start time.
    pub stamp: f64,
    points: Vec<TimedPoint>,
}

impl TimedPointCloud {
    /// Builds a cloud, stably sorting points by their time offset.
    pub fn new(stamp: f64, mut points: Vec<TimedPoint>) -> Self {
        if !points.windows(2).all(|w| w[0].dt <= w[1].dt) {
            points.sort_by(|a, b| a.dt.total_cmp(&b.dt));
        }
        Self { stamp, points }
    }

    pub fn empty(stamp: f64) -> Self {
        Self {
            stamp,
            points: Vec::new(),
        }
    }

    pub fn points(&self) -> &[TimedPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<TimedPoint> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.xyz).collect()
    }

    /// Time offset of the last point, zero for an empty cloud.
    pub fn max_dt(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.dt)
    }

    /// Absolute time of the last point.
    pub fn end_stamp(&self) -> f64 {
        self.stamp + self.max_dt()
    }

    /// Applies a rigid transform to every point, keeping time offsets.
    pub fn transformed(&self, pose: &Pose) -> TimedPointCloud {
        TimedPointCloud {
            stamp: self.stamp,
            points: self
                .points
                .iter()
                .map(|p| TimedPoint::new(pose.transform_point(&p.xyz), p.dt))
                .collect(),
        }
    }

    /// Wraps points without sorting. Map clouds concatenate keyframes whose
    /// time offsets are unrelated, so ordering carries no meaning there.
    pub(crate) fn from_unsorted(stamp: f64, points: Vec<TimedPoint>) -> Self {
        Self { stamp, points }
    }

    /// Appends points from another cloud without re-sorting; time offsets
    /// lose their meaning, which is fine for map clouds.
    pub(crate) fn extend_unsorted(&mut self, other: &TimedPointCloud) {
        self.points.extend_from_slice(&other.points);
    }
}
