//! Pipeline configuration and its key-value file form.

use std::path::Path;

use crate::deskew::DeskewMode;
use crate::error::{Error, Result};
use crate::gicp::GicpParams;
use crate::kv::{fmt_quaternion, fmt_vec3, format_entries, KvFile};
use crate::map::KeyframeThresholds;
use crate::observer::ObserverGains;
use crate::preprocess::{Extrinsics, FilterSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub extrinsics: Extrinsics,
    pub filter: FilterSpec,
    pub gicp: GicpParams,
    pub keyframes: KeyframeThresholds,
    pub n_nearest: usize,
    pub gains: ObserverGains,
    pub deskew: DeskewMode,
    /// Static window at the start of the stream, seconds.
    pub calibration_window: f64,
    /// Largest per-axis accel variance accepted as static, (m/s^2)^2.
    pub max_static_accel_variance: f64,
    /// Leaf size for the exported map, 0 keeps every point.
    pub map_voxel_leaf: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            extrinsics: Extrinsics::default(),
            filter: FilterSpec::default(),
            gicp: GicpParams::default(),
            keyframes: KeyframeThresholds::default(),
            n_nearest: 10,
            gains: ObserverGains::default(),
            deskew: DeskewMode::Continuous,
            calibration_window: 1.0,
            max_static_accel_variance: 0.05,
            map_voxel_leaf: 0.1,
        }
    }
}

const KEYS: &[&str] = &[
    "extrinsics.lidar_translation",
    "extrinsics.lidar_rotation",
    "extrinsics.imu_translation",
    "extrinsics.imu_rotation",
    "filter.box_half_extent",
    "filter.voxel_leaf",
    "gicp.k_neighbors",
    "gicp.epsilon",
    "gicp.max_corr_dist",
    "gicp.max_iterations",
    "gicp.inner_iterations",
    "gicp.trans_eps",
    "gicp.rot_eps",
    "gicp.min_correspondences",
    "keyframe.dist",
    "keyframe.angle_deg",
    "submap.n_nearest",
    "observer.gamma1",
    "observer.gamma2",
    "observer.gamma3",
    "observer.gamma4",
    "observer.gamma5",
    "deskew.mode",
    "calibration.window",
    "calibration.max_accel_variance",
    "map.voxel_leaf",
];

fn set<T: std::str::FromStr>(kv: &KvFile, key: &str, slot: &mut T) -> Result<()>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = kv.get(key)? {
        *slot = v;
    }
    Ok(())
}

/// Shortest of the exact and the rounded degree text that still parses back
/// to the same radians.
fn degrees_text(rad: f64) -> String {
    let rounded = (rad.to_degrees() * 1e9).round() / 1e9;
    if rounded.to_radians() == rad {
        rounded.to_string()
    } else {
        rad.to_degrees().to_string()
    }
}

impl PipelineConfig {
    /// Overlays every key present in `kv`; unknown keys are errors.
    pub fn apply(&mut self, kv: &KvFile) -> Result<()> {
        kv.reject_unknown(KEYS)?;
        kv.pose_into("extrinsics.lidar", &mut self.extrinsics.lidar_to_robot)?;
        kv.pose_into("extrinsics.imu", &mut self.extrinsics.imu_to_robot)?;
        set(
            kv,
            "filter.box_half_extent",
            &mut self.filter.box_half_extent,
        )?;
        set(kv, "filter.voxel_leaf", &mut self.filter.voxel_leaf)?;
        let g = &mut self.gicp;
        set(kv, "gicp.k_neighbors", &mut g.k_neighbors)?;
        set(kv, "gicp.epsilon", &mut g.epsilon)?;
        set(kv, "gicp.max_corr_dist", &mut g.max_corr_dist)?;
        set(kv, "gicp.max_iterations", &mut g.max_iterations)?;
        set(kv, "gicp.inner_iterations", &mut g.inner_iterations)?;
        set(kv, "gicp.trans_eps", &mut g.trans_eps)?;
        set(kv, "gicp.rot_eps", &mut g.rot_eps)?;
        set(kv, "gicp.min_correspondences", &mut g.min_correspondences)?;
        set(kv, "keyframe.dist", &mut self.keyframes.dist)?;
        if let Some(deg) = kv.get::<f64>("keyframe.angle_deg")? {
            self.keyframes.angle = deg.to_radians();
        }
        set(kv, "submap.n_nearest", &mut self.n_nearest)?;
        set(kv, "observer.gamma1", &mut self.gains.gamma1)?;
        set(kv, "observer.gamma2", &mut self.gains.gamma2)?;
        set(kv, "observer.gamma3", &mut self.gains.gamma3)?;
        set(kv, "observer.gamma4", &mut self.gains.gamma4)?;
        set(kv, "observer.gamma5", &mut self.gains.gamma5)?;
        set(kv, "deskew.mode", &mut self.deskew)?;
        set(kv, "calibration.window", &mut self.calibration_window)?;
        set(
            kv,
            "calibration.max_accel_variance",
            &mut self.max_static_accel_variance,
        )?;
        set(kv, "map.voxel_leaf", &mut self.map_voxel_leaf)?;
        self.validate()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(&KvFile::read(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.gicp.validate()?;
        self.gains.validate()?;
        if self.n_nearest == 0 {
            return Err(Error::invalid("submap.n_nearest", "must be >= 1"));
        }
        if !(self.keyframes.dist >= 0.0) || !(self.keyframes.angle >= 0.0) {
            return Err(Error::invalid("keyframe", "thresholds must be >= 0"));
        }
        if !(self.calibration_window > 0.0) {
            return Err(Error::invalid("calibration.window", "must be > 0"));
        }
        if !(self.max_static_accel_variance > 0.0) {
            return Err(Error::invalid(
                "calibration.max_accel_variance",
                "must be > 0",
            ));
        }
        if !(self.map_voxel_leaf >= 0.0) {
            return Err(Error::invalid("map.voxel_leaf", "must be >= 0"));
        }
        Ok(())
    }

    /// Every field as key-value text, readable by [`PipelineConfig::apply`].
    pub fn to_kv_string(&self) -> String {
        let e = &self.extrinsics;
        let g = &self.gicp;
        format_entries(&[
            (
                "extrinsics.lidar_translation",
                fmt_vec3(&e.lidar_to_robot.position),
            ),
            (
                "extrinsics.lidar_rotation",
                fmt_quaternion(&e.lidar_to_robot.orientation),
            ),
            (
                "extrinsics.imu_translation",
                fmt_vec3(&e.imu_to_robot.position),
            ),
            (
                "extrinsics.imu_rotation",
                fmt_quaternion(&e.imu_to_robot.orientation),
            ),
            (
                "filter.box_half_extent",
                self.filter.box_half_extent.to_string(),
            ),
            ("filter.voxel_leaf", self.filter.voxel_leaf.to_string()),
            ("gicp.k_neighbors", g.k_neighbors.to_string()),
            ("gicp.epsilon", g.epsilon.to_string()),
            ("gicp.max_corr_dist", g.max_corr_dist.to_string()),
            ("gicp.max_iterations", g.max_iterations.to_string()),
            ("gicp.inner_iterations", g.inner_iterations.to_string()),
            ("gicp.trans_eps", g.trans_eps.to_string()),
            ("gicp.rot_eps", g.rot_eps.to_string()),
            (
                "gicp.min_correspondences",
                g.min_correspondences.to_string(),
            ),
            ("keyframe.dist", self.keyframes.dist.to_string()),
            ("keyframe.angle_deg", degrees_text(self.keyframes.angle)),
            ("submap.n_nearest", self.n_nearest.to_string()),
            ("observer.gamma1", self.gains.gamma1.to_string()),
            ("observer.gamma2", self.gains.gamma2.to_string()),
            ("observer.gamma3", self.gains.gamma3.to_string()),
            ("observer.gamma4", self.gains.gamma4.to_string()),
            ("observer.gamma5", self.gains.gamma5.to_string()),
            ("deskew.mode", self.deskew.to_string()),
            ("calibration.window", self.calibration_window.to_string()),
            (
                "calibration.max_accel_variance",
                self.max_static_accel_variance.to_string(),
            ),
            ("map.voxel_leaf", self.map_voxel_leaf.to_string()),
        ])
    }
}
