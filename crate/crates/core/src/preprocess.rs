//! Bringing raw sensor data into the robot frame and light cloud filtering.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::types::{ImuSample, TimedPoint, TimedPointCloud};

/// Sensor mounting: maps sensor-frame quantities into the robot frame.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Extrinsics {
    pub lidar_to_robot: Pose,
    /// Rotation plus IMU offset from the robot origin, metres.
    pub imu_to_robot: Pose,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSpec {
    /// Points with all |coordinates| below this are dropped. 0 disables.
    pub box_half_extent: f64,
    /// Voxel edge length. 0 disables.
    pub voxel_leaf: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            box_half_extent: 0.5,
            voxel_leaf: 0.25,
        }
    }
}

impl FilterSpec {
    pub fn disabled() -> Self {
        Self {
            box_half_extent: 0.0,
            voxel_leaf: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.box_half_extent >= 0.0) {
            return Err(Error::invalid("box_half_extent", "must be >= 0"));
        }
        if !(self.voxel_leaf >= 0.0) {
            return Err(Error::invalid("voxel_leaf", "must be >= 0"));
        }
        Ok(())
    }
}

/// Rotates an IMU sample into the robot frame and removes the tangential and
/// centripetal acceleration picked up by an accelerometer mounted away from
/// the robot origin.
///
/// Angular acceleration is a backward difference against `prev`; without a
/// previous sample it is taken as zero.
pub fn compensate_lever_arm(
    sample: &ImuSample,
    ext: &Extrinsics,
    prev: Option<&ImuSample>,
) -> Result<ImuSample> {
    if !sample.is_finite() {
        return Err(Error::NonFinite("IMU sample"));
    }
    let q = ext.imu_to_robot.orientation;
    let r = ext.imu_to_robot.position;
    let omega = q.rotate(&sample.gyro);
    let alpha = match prev {
        Some(p) => {
            if p.stamp >= sample.stamp {
                return Err(Error::NonMonotonicStamp {
                    previous: p.stamp,
                    next: sample.stamp,
                });
            }
            (omega - q.rotate(&p.gyro)) / (sample.stamp - p.stamp)
        }
        None => Vec3::zeros(),
    };
    let accel = q.rotate(&sample.accel) - alpha.cross(&r) - omega.cross(&omega.cross(&r));
    Ok(ImuSample::new(sample.stamp, accel, omega))
}

/// Expresses a sensor-frame cloud in the robot frame.
pub fn to_robot_frame(cloud: &TimedPointCloud, sensor_to_robot: &Pose) -> TimedPointCloud {
    cloud.transformed(sensor_to_robot)
}

/// Result of [`filter_cloud`].
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredCloud {
    pub cloud: TimedPointCloud,
    pub removed_by_box: usize,
    pub removed_by_voxel: usize,
}

impl FilteredCloud {
    /// Nothing survived filtering; the scan cannot be processed.
    pub fn is_empty_scan(&self) -> bool {
        self.cloud.is_empty()
    }
}

/// Box crop around the origin followed by voxel downsampling.
///
/// The voxel stage keeps the earliest point in each cell so surviving points
/// retain their exact capture times.
pub fn filter_cloud(cloud: &TimedPointCloud, spec: &FilterSpec) -> FilteredCloud {
    let half = spec.box_half_extent;
    let cropped: Vec<TimedPoint> = cloud
        .points()
        .iter()
        .filter(|p| p.xyz.amax() >= half)
        .copied()
        .collect();
    let removed_by_box = cloud.len() - cropped.len();
    let kept = voxel_first_in_time(&cropped, spec.voxel_leaf);
    let removed_by_voxel = cropped.len() - kept.len();
    FilteredCloud {
        cloud: TimedPointCloud::new(cloud.stamp, kept),
        removed_by_box,
        removed_by_voxel,
    }
}

/// Keeps the first point (in slice order) falling into each voxel.
pub fn voxel_first_in_time(points: &[TimedPoint], leaf: f64) -> Vec<TimedPoint> {
    if leaf <= 0.0 {
        return points.to_vec();
    }
    let mut seen = HashSet::with_capacity(points.len());
    points
        .iter()
        .filter(|p| seen.insert(voxel_key(&p.xyz, leaf)))
        .copied()
        .collect()
}

fn voxel_key(p: &Vec3, leaf: f64) -> (i64, i64, i64) {
    (
        (p.x / leaf).floor() as i64,
        (p.y / leaf).floor() as i64,
        (p.z / leaf).floor() as i64,
    )
}
