//! Complete synthetic scenarios: trajectory, scene, sensors, noise and mounts.

use std::path::Path;

use crate::dataset::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::kv::KvFile;
use crate::metrics::StampedPose;
use crate::preprocess::Extrinsics;
use crate::simulator::{
    ground_truth_pose, render_sweep, sample_imu, sample_imu_mounted, AxisBox, LidarSpec, SceneSpec,
    SimNoiseSpec, TrajectoryKind, TrajectorySpec,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub trajectory: TrajectorySpec,
    pub scene: SceneSpec,
    pub lidar: LidarSpec,
    pub imu_rate: f64,
    pub noise: SimNoiseSpec,
    pub extrinsics: Extrinsics,
}

impl Scenario {
    fn with(trajectory: TrajectorySpec) -> Self {
        Self {
            trajectory,
            scene: SceneSpec::box_room(20.0, 5.0, -1.5),
            lidar: LidarSpec::default(),
            imu_rate: 100.0,
            noise: SimNoiseSpec::noiseless(),
            extrinsics: Extrinsics {
                lidar_to_robot: Pose::from_translation(Vec3::new(0.0, 0.0, 0.2)),
                imu_to_robot: Pose::identity(),
            },
        }
    }

    /// 30 s of smooth motion in a 20 m room after a 1 s static preamble and
    /// a 1 s ease-in, returning near its start.
    pub fn sinusoid_room(seed: u64) -> Self {
        let mut s = Self::with(TrajectorySpec::new(
            TrajectoryKind::Sinusoid {
                amplitude: Vec3::new(3.0, 2.0, 0.2),
                frequency: Vec3::new(0.1, 0.2, 0.1),
                angle_amplitude: Vec3::new(0.05, 0.05, 0.8),
                angle_frequency: Vec3::new(0.2, 0.1, 0.1),
            },
            31.6,
        ));
        s.noise = SimNoiseSpec::realistic(seed);
        s
    }

    /// 3.5 rad/s yaw spin with a translation sway.
    pub fn aggressive_spin(duration: f64, seed: u64) -> Self {
        let mut s = Self::with(TrajectorySpec::aggressive_spin(duration));
        s.noise = SimNoiseSpec::realistic(seed);
        s
    }

    pub fn static_room(duration: f64) -> Self {
        Self::with(TrajectorySpec::new(TrajectoryKind::Static, duration))
    }

    pub fn validate(&self) -> Result<()> {
        self.trajectory.validate()?;
        self.scene.validate()?;
        self.lidar.validate()?;
        self.noise.validate()?;
        if !(self.imu_rate > 0.0) {
            return Err(Error::invalid("imu.rate", "must be > 0"));
        }
        Ok(())
    }

    /// Sweep start times that fit in the trajectory.
    pub fn scan_stamps(&self) -> Vec<f64> {
        let period = self.lidar.sweep_period();
        (0..)
            .map(|k| k as f64 / self.lidar.rate)
            .take_while(|t0| t0 + period <= self.trajectory.duration + 1e-9)
            .collect()
    }

    pub fn simulate(&self) -> Result<Dataset> {
        self.validate()?;
        let imu = if self.extrinsics.imu_to_robot == Pose::identity() {
            sample_imu(&self.trajectory, self.imu_rate, &self.noise)?
        } else {
            sample_imu_mounted(
                &self.trajectory,
                self.imu_rate,
                &self.noise,
                &self.extrinsics.imu_to_robot,
            )?
        };
        let ground_truth = imu
            .iter()
            .map(|s| StampedPose::new(s.stamp, ground_truth_pose(&self.trajectory, s.stamp)))
            .collect();
        let scans = self
            .scan_stamps()
            .into_iter()
            .map(|t0| {
                render_sweep(
                    &self.trajectory,
                    &self.scene,
                    &self.lidar,
                    &self.extrinsics.lidar_to_robot,
                    t0,
                )
                .map(|s| s.distorted)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            meta: DatasetMeta {
                imu_rate: self.imu_rate,
                lidar_rate: self.lidar.rate,
                extrinsics: self.extrinsics,
            },
            imu,
            scans,
            ground_truth,
        })
    }

    /// Reads a scenario file. `seed` overrides the noise seed.
    pub fn from_file(path: &Path, seed: u64) -> Result<Self> {
        let mut s = Self::from_kv(&KvFile::read(path)?)?;
        s.noise.seed = seed;
        Ok(s)
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let unknown = kv
            .keys()
            .find(|k| !SCENARIO_KEYS.contains(k) && !k.starts_with("scene.box."));
        if let Some(k) = unknown {
            return Err(Error::invalid(k, "unknown scenario key"));
        }
        let duration: f64 = kv.require("trajectory.duration")?;
        let v3 = |key: &str| -> Result<Vec3> { Ok(kv.vec3(key)?.unwrap_or_else(Vec3::zeros)) };
        let f = |key: &str, default: f64| -> Result<f64> { Ok(kv.get(key)?.unwrap_or(default)) };
        let kind_name: String = kv.require("trajectory.kind")?;
        let kind = match kind_name.as_str() {
            "static" => TrajectoryKind::Static,
            "constant_velocity" => TrajectoryKind::ConstantVelocity {
                velocity: v3("trajectory.velocity")?,
            },
            "constant_accel" => TrajectoryKind::ConstantAccel {
                accel: v3("trajectory.accel")?,
            },
            "sinusoid" => TrajectoryKind::Sinusoid {
                amplitude: v3("trajectory.amplitude")?,
                frequency: v3("trajectory.frequency")?,
                angle_amplitude: v3("trajectory.angle_amplitude")?,
                angle_frequency: v3("trajectory.angle_frequency")?,
            },
            "aggressive_spin" => TrajectoryKind::AggressiveSpin {
                spin_rate: f("trajectory.spin_rate", 3.5)?,
                amplitude: v3("trajectory.amplitude")?,
                frequency: v3("trajectory.frequency")?,
                wobble: f("trajectory.wobble", 0.0)?,
                wobble_frequency: f("trajectory.wobble_frequency", 0.0)?,
            },
            other => {
                return Err(Error::invalid(
                    "trajectory.kind",
                    format!("unknown kind `{other}`"),
                ))
            }
        };
        let mut trajectory = TrajectorySpec::new(kind, duration);
        trajectory.preamble = f("trajectory.preamble", trajectory.preamble)?;
        trajectory.ramp = f("trajectory.ramp", trajectory.ramp)?;
        kv.pose_into("trajectory.origin", &mut trajectory.origin)?;

        let mut s = Self::with(trajectory);
        if let Some(room) = kv.floats::<3>("scene.room")? {
            s.scene = SceneSpec::box_room(room[0], room[1], room[2]);
        }
        if kv.get::<String>("scene.pillars")?.as_deref() == Some("false") {
            s.scene.boxes.truncate(1);
        }
        for key in kv.keys().filter(|k| k.starts_with("scene.box.")) {
            let b = kv.floats::<6>(key)?.expect("key present");
            s.scene.boxes.push(AxisBox::new(
                Vec3::new(b[0], b[1], b[2]),
                Vec3::new(b[3], b[4], b[5]),
            ));
        }

        let l = &mut s.lidar;
        l.channels = kv.get("lidar.channels")?.unwrap_or(l.channels);
        l.horiz_res = kv.get("lidar.horiz_res")?.unwrap_or(l.horiz_res);
        l.rate = f("lidar.rate", l.rate)?;
        l.max_range = f("lidar.max_range", l.max_range)?;
        l.min_range = f("lidar.min_range", l.min_range)?;
        l.vertical_fov = f("lidar.vertical_fov_deg", l.vertical_fov.to_degrees())?.to_radians();

        s.imu_rate = f("imu.rate", s.imu_rate)?;
        s.noise.accel_noise_std = f("noise.accel_std", 0.0)?;
        s.noise.gyro_noise_std = f("noise.gyro_std", 0.0)?;
        s.noise.accel_bias = v3("noise.accel_bias")?;
        s.noise.gyro_bias = v3("noise.gyro_bias")?;
        kv.pose_into("extrinsics.lidar", &mut s.extrinsics.lidar_to_robot)?;
        kv.pose_into("extrinsics.imu", &mut s.extrinsics.imu_to_robot)?;
        s.validate()?;
        Ok(s)
    }
}

const SCENARIO_KEYS: &[&str] = &[
    "trajectory.kind",
    "trajectory.duration",
    "trajectory.preamble",
    "trajectory.ramp",
    "trajectory.origin_translation",
    "trajectory.origin_rotation",
    "trajectory.velocity",
    "trajectory.accel",
    "trajectory.amplitude",
    "trajectory.frequency",
    "trajectory.angle_amplitude",
    "trajectory.angle_frequency",
    "trajectory.spin_rate",
    "trajectory.wobble",
    "trajectory.wobble_frequency",
    "scene.room",
    "scene.pillars",
    "lidar.channels",
    "lidar.horiz_res",
    "lidar.rate",
    "lidar.max_range",
    "lidar.min_range",
    "lidar.vertical_fov_deg",
    "imu.rate",
    "noise.accel_std",
    "noise.gyro_std",
    "noise.accel_bias",
    "noise.gyro_bias",
    "extrinsics.lidar_translation",
    "extrinsics.lidar_rotation",
    "extrinsics.imu_translation",
    "extrinsics.imu_rotation",
];
