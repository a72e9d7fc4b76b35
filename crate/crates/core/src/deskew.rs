//! Point-wise motion correction.
//!
//! Every point is moved into the world frame with the pose the sensor had
//! when that point was captured. The output therefore also carries the
//! registration prior: it is already approximately aligned with the map.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::propagation::DiscreteTrajectory;
use crate::types::{TimedPoint, TimedPointCloud};

/// Fraction of clamped points above which [`DeskewStatus::Warning`] is set.
pub const CLAMP_WARNING_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DeskewMode {
    /// One transform, the pose at sweep start, for every point.
    None,
    /// Pose of the closest preceding IMU knot.
    Discrete,
    /// Closed-form continuous-time pose at each point's timestamp.
    #[default]
    Continuous,
}

impl DeskewMode {
    pub const ALL: [DeskewMode; 3] = [
        DeskewMode::None,
        DeskewMode::Discrete,
        DeskewMode::Continuous,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DeskewMode::None => "none",
            DeskewMode::Discrete => "discrete",
            DeskewMode::Continuous => "continuous",
        }
    }
}

impl fmt::Display for DeskewMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeskewMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DeskewMode::None),
            "discrete" => Ok(DeskewMode::Discrete),
            "continuous" => Ok(DeskewMode::Continuous),
            other => Err(Error::invalid(
                "deskew",
                format!("expected none|discrete|continuous, got {other:?}"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeskewStatus {
    Ok,
    /// More than [`CLAMP_WARNING_FRACTION`] of the points fell outside the
    /// trajectory span and were clamped to its ends.
    Warning,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeskewedCloud {
    /// Points in the world frame, same order and time offsets as the input.
    pub cloud: TimedPointCloud,
    pub clamped: usize,
    pub status: DeskewStatus,
}

/// Continuous-time deskew of `cloud`, whose points are expressed in the frame
/// that `sensor_to_robot` maps into the robot frame (identity if the cloud is
/// already in the robot frame).
pub fn deskew_scan(
    cloud: &TimedPointCloud,
    traj: &DiscreteTrajectory,
    sensor_to_robot: &Pose,
) -> DeskewedCloud {
    deskew_mode(cloud, traj, sensor_to_robot, DeskewMode::Continuous)
}

/// Deskews with the requested correction model, in parallel over points.
pub fn deskew_mode(
    cloud: &TimedPointCloud,
    traj: &DiscreteTrajectory,
    sensor_to_robot: &Pose,
    mode: DeskewMode,
) -> DeskewedCloud {
    let ctx = Context::new(cloud, traj, sensor_to_robot, mode);
    let points: Vec<TimedPoint> = cloud.points().par_iter().map(|p| ctx.correct(p)).collect();
    ctx.finish(cloud, points)
}

/// Single-threaded equivalent of [`deskew_mode`]; outputs are bit-identical.
pub fn deskew_mode_serial(
    cloud: &TimedPointCloud,
    traj: &DiscreteTrajectory,
    sensor_to_robot: &Pose,
    mode: DeskewMode,
) -> DeskewedCloud {
    let ctx = Context::new(cloud, traj, sensor_to_robot, mode);
    let points: Vec<TimedPoint> = cloud.points().iter().map(|p| ctx.correct(p)).collect();
    ctx.finish(cloud, points)
}

struct Context<'a> {
    traj: &'a DiscreteTrajectory,
    sensor_to_robot: Pose,
    mode: DeskewMode,
    stamp: f64,
    /// Only used by `DeskewMode::None`.
    sweep_start: Pose,
}

impl<'a> Context<'a> {
    fn new(
        cloud: &TimedPointCloud,
        traj: &'a DiscreteTrajectory,
        sensor_to_robot: &Pose,
        mode: DeskewMode,
    ) -> Self {
        let sweep_start = traj
            .query_pose(traj.clamp(cloud.stamp))
            .expect("clamped time lies in span");
        Self {
            traj,
            sensor_to_robot: *sensor_to_robot,
            mode,
            stamp: cloud.stamp,
            sweep_start,
        }
    }

    fn correct(&self, p: &TimedPoint) -> TimedPoint {
        let t = self.traj.clamp(self.stamp + p.dt);
        let world = match self.mode {
            DeskewMode::None => self.sweep_start,
            DeskewMode::Discrete => self.traj.knot_pose(t).expect("clamped"),
            DeskewMode::Continuous => self.traj.query_pose(t).expect("clamped"),
        };
        let robot = self.sensor_to_robot.transform_point(&p.xyz);
        TimedPoint::new(world.transform_point(&robot), p.dt)
    }

    fn finish(&self, cloud: &TimedPointCloud, points: Vec<TimedPoint>) -> DeskewedCloud {
        let clamped = match self.mode {
            DeskewMode::None => usize::from(!self.traj.contains(self.stamp)) * cloud.len(),
            _ => cloud
                .points()
                .iter()
                .filter(|p| !self.traj.contains(self.stamp + p.dt))
                .count(),
        };
        let status = if (clamped as f64) > CLAMP_WARNING_FRACTION * cloud.len() as f64 {
            DeskewStatus::Warning
        } else {
            DeskewStatus::Ok
        };
        DeskewedCloud {
            cloud: TimedPointCloud::new(cloud.stamp, points),
            clamped,
            status,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gravity, Quaternion, Vec3};
    use crate::propagation::integrate_imu;
    use crate::types::{ImuSample, RobotState};

    fn traj_with(start: RobotState, gyro: Vec3) -> DiscreteTrajectory {
        let samples: Vec<ImuSample> = (0..12)
            .map(|i| {
                let specific = start.orientation.conjugate().rotate(&-gravity());
                ImuSample::new(start.stamp + i as f64 * 0.01, specific, gyro)
            })
            .collect();
        integrate_imu(&start, &samples).unwrap()
    }

    fn ring(stamp: f64) -> TimedPointCloud {
        TimedPointCloud::new(
            stamp,
            (0..100)
                .map(|i| {
                    let a = i as f64 * 0.0628;
                    TimedPoint::new(
                        Vec3::new(5.0 * a.cos(), 5.0 * a.sin(), 0.3),
                        i as f64 * 0.001,
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn stationary_is_rigid_transform_in_every_mode() {
        let pose = Pose::new(
            Vec3::new(1.0, 2.0, 0.5),
            Quaternion::from_euler(0.0, 0.1, 0.7),
        );
        let start = RobotState::default().with_pose(&pose);
        let traj = traj_with(start, Vec3::zeros());
        let cloud = ring(0.0);
        let expected = cloud.transformed(&pose);
        for mode in DeskewMode::ALL {
            let out = deskew_mode(&cloud, &traj, &Pose::identity(), mode);
            assert_eq!(out.clamped, 0);
            for (a, b) in out.cloud.points().iter().zip(expected.points()) {
                assert!((a.xyz - b.xyz).norm() < 1e-12);
                assert_eq!(a.dt, b.dt);
            }
        }
    }

    #[test]
    fn none_mode_uses_sweep_start_pose() {
        let traj = traj_with(RobotState::default(), Vec3::new(0.0, 0.0, 2.0));
        let cloud = ring(0.0);
        let start = traj.query_pose(0.0).unwrap();
        let out = deskew_mode(&cloud, &traj, &Pose::identity(), DeskewMode::None);
        assert_eq!(out.cloud, cloud.transformed(&start));
    }

    #[test]
    fn equal_timestamps_get_equal_transforms() {
        let traj = traj_with(RobotState::default(), Vec3::new(0.1, 0.0, 3.0));
        let cloud = TimedPointCloud::new(
            0.0,
            vec![
                TimedPoint::new(Vec3::new(1.0, 0.0, 0.0), 0.042),
                TimedPoint::new(Vec3::new(0.0, 3.0, 1.0), 0.042),
            ],
        );
        let out = deskew_scan(&cloud, &traj, &Pose::identity());
        let pose = traj.query_pose(0.042).unwrap();
        for (o, i) in out.cloud.points().iter().zip(cloud.points()) {
            assert_eq!(o.xyz, pose.transform_point(&i.xyz));
        }
    }

    #[test]
    fn clamps_and_warns_outside_span() {
        let traj = traj_with(RobotState::default(), Vec3::new(0.0, 0.0, 1.0));
        // sweep starts 5 ms before the trajectory: first five points clamped
        let cloud = ring(-0.005);
        let out = deskew_scan(&cloud, &traj, &Pose::identity());
        assert_eq!(out.clamped, 5);
        assert_eq!(out.status, DeskewStatus::Warning);
        let first = traj.query_pose(0.0).unwrap();
        assert_eq!(
            out.cloud.points()[0].xyz,
            first.transform_point(&cloud.points()[0].xyz)
        );
    }

    #[test]
    fn parallel_equals_serial() {
        let traj = traj_with(RobotState::default(), Vec3::new(0.3, -0.2, 3.5));
        let cloud = ring(0.0);
        for mode in DeskewMode::ALL {
            let a = deskew_mode(&cloud, &traj, &Pose::identity(), mode);
            let b = deskew_mode_serial(&cloud, &traj, &Pose::identity(), mode);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn mode_parsing() {
        for m in DeskewMode::ALL {
            assert_eq!(m.as_str().parse::<DeskewMode>().unwrap(), m);
        }
        assert!("cubic".parse::<DeskewMode>().is_err());
    }
}
