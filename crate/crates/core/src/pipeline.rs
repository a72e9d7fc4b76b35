//! The odometry loop: IMU propagation, scan deskew, scan-to-map
//! registration, observer correction and keyframing.
//!
//! Offline runs merge the IMU and scan streams by time. A scan is processed
//! as soon as an IMU sample at or after its last point has been seen.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use crate::config::PipelineConfig;
use crate::dataset::{Dataset, DatasetMeta};
use crate::deskew::deskew_mode;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Quaternion, Vec3, GRAVITY_MAGNITUDE};
use crate::gicp::{align_to, estimate_covariances, refine_pose, GicpTarget};
use crate::kv::KvFile;
use crate::map::{write_ply_file, KeyframeMap};
use crate::metrics::{write_tum, StampedPose};
use crate::observer;
use crate::preprocess::{compensate_lever_arm, filter_cloud, to_robot_frame};
use crate::propagation::integrate_imu;
use crate::types::{ImuSample, RobotState, TimedPointCloud};

/// Result of the static initialisation window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
    pub orientation: Quaternion,
    pub samples: usize,
}

/// Estimates biases and roll/pitch from samples in
/// `[first stamp, first stamp + duration]`. Yaw is zero.
pub fn calibrate_static(
    samples: &[ImuSample],
    duration: f64,
    max_accel_variance: f64,
) -> Result<Calibration> {
    let Some(first) = samples.first() else {
        return Err(Error::TooFewSamples {
            required: 2,
            found: 0,
        });
    };
    let window: Vec<&ImuSample> = samples
        .iter()
        .take_while(|s| s.stamp <= first.stamp + duration + 1e-9)
        .collect();
    if window.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: window.len(),
        });
    }
    let n = window.len() as f64;
    let mean_accel = window.iter().map(|s| s.accel).sum::<Vec3>() / n;
    let mean_gyro = window.iter().map(|s| s.gyro).sum::<Vec3>() / n;
    let variance = window
        .iter()
        .map(|s| (s.accel - mean_accel).component_mul(&(s.accel - mean_accel)))
        .sum::<Vec3>()
        / n;
    let worst = variance.max();
    if worst > max_accel_variance {
        return Err(Error::NotStatic {
            variance: worst,
            threshold: max_accel_variance,
        });
    }
    let m = mean_accel;
    let roll = m.y.atan2(m.z);
    let pitch = (-m.x).atan2((m.y * m.y + m.z * m.z).sqrt());
    Ok(Calibration {
        gyro_bias: mean_gyro,
        accel_bias: m.normalize() * (m.norm() - GRAVITY_MAGNITUDE),
        orientation: Quaternion::from_euler(roll, pitch, 0.0),
        samples: window.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanStatus {
    /// First scan, inserted into the map without registration.
    Bootstrap,
    Registered,
    /// Too few correspondences; the prior pose was kept.
    Degenerate,
    /// Nothing survived filtering; the prior pose was kept.
    EmptyScan,
}

impl ScanStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanStatus::Bootstrap => "bootstrap",
            ScanStatus::Registered => "registered",
            ScanStatus::Degenerate => "degenerate",
            ScanStatus::EmptyScan => "empty",
        }
    }
}

impl fmt::Display for ScanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdometryRecord {
    /// Sweep start time.
    pub stamp: f64,
    /// Robot pose at `stamp`.
    pub pose: Pose,
    pub velocity: Vec3,
    pub accel_bias: Vec3,
    pub gyro_bias: Vec3,
    /// Wall time spent on the scan.
    pub processing_ms: f64,
    pub gicp_iterations: usize,
    pub correspondences: usize,
    pub points: usize,
    pub deskew_clamped: usize,
    pub keyframe: bool,
    pub status: ScanStatus,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PipelineCounters {
    pub imu_dropped: usize,
    pub scans_before_calibration: usize,
    pub scans_without_imu: usize,
    pub scans_out_of_order: usize,
    pub empty_scans: usize,
    pub degenerate_scans: usize,
}

#[derive(Clone, Copy, Debug)]
struct HistoryEntry {
    /// Compensated, robot-frame sample.
    sample: ImuSample,
    /// Observer state at `sample.stamp`.
    state: RobotState,
}

pub struct Odometry {
    config: PipelineConfig,
    calibration_buffer: Vec<ImuSample>,
    calibration: Option<Calibration>,
    last_raw: Option<ImuSample>,
    history: VecDeque<HistoryEntry>,
    map: KeyframeMap,
    last_correction: Option<f64>,
    records: Vec<OdometryRecord>,
    counters: PipelineCounters,
}

impl Odometry {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            calibration_buffer: Vec::new(),
            calibration: None,
            last_raw: None,
            history: VecDeque::new(),
            map: KeyframeMap::new(),
            last_correction: None,
            records: Vec::new(),
            counters: PipelineCounters::default(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn calibration(&self) -> Option<&Calibration> {
        self.calibration.as_ref()
    }

    pub fn map(&self) -> &KeyframeMap {
        &self.map
    }

    pub fn records(&self) -> &[OdometryRecord] {
        &self.records
    }

    pub fn counters(&self) -> PipelineCounters {
        self.counters
    }

    /// Latest propagated state.
    pub fn state(&self) -> Option<RobotState> {
        self.history.back().map(|h| h.state)
    }

    pub fn trajectory(&self) -> Vec<StampedPose> {
        self.records
            .iter()
            .map(|r| StampedPose::new(r.stamp, r.pose))
            .collect()
    }

    /// Feeds one raw IMU sample. Returns the propagated state once
    /// calibration has finished. Stale or non-finite samples are dropped and
    /// counted.
    pub fn process_imu(&mut self, raw: &ImuSample) -> Result<Option<RobotState>> {
        let stale = self.last_raw.is_some_and(|prev| raw.stamp <= prev.stamp);
        if stale || !raw.is_finite() {
            self.counters.imu_dropped += 1;
            return Ok(None);
        }
        let sample = compensate_lever_arm(raw, &self.config.extrinsics, self.last_raw.as_ref())?;
        self.last_raw = Some(*raw);

        if self.calibration.is_none() {
            self.calibration_buffer.push(sample);
            let first = self.calibration_buffer[0].stamp;
            if sample.stamp - first < self.config.calibration_window - 1e-9 {
                return Ok(None);
            }
            let cal = calibrate_static(
                &self.calibration_buffer,
                self.config.calibration_window,
                self.config.max_static_accel_variance,
            )?;
            self.calibration = Some(cal);
            self.calibration_buffer = Vec::new();
            let state = RobotState {
                orientation: cal.orientation,
                accel_bias: cal.accel_bias,
                gyro_bias: cal.gyro_bias,
                stamp: sample.stamp,
                ..RobotState::default()
            };
            self.history.push_back(HistoryEntry { sample, state });
            return Ok(Some(state));
        }

        let last = *self.history.back().expect("history starts at calibration");
        let state =
            observer::propagate(&last.state, &last.sample, sample.stamp - last.sample.stamp)?;
        self.history.push_back(HistoryEntry { sample, state });
        Ok(Some(state))
    }

    /// Re-runs propagation after the entry at `from` was corrected.
    fn repropagate(&mut self, from: usize) -> Result<()> {
        for i in from + 1..self.history.len() {
            let prev = self.history[i - 1];
            let dt = self.history[i].sample.stamp - prev.sample.stamp;
            self.history[i].state = observer::propagate(&prev.state, &prev.sample, dt)?;
        }
        Ok(())
    }

    /// Processes one sweep given in the LiDAR frame. Returns `None` when the
    /// scan cannot be processed: before calibration, without IMU coverage,
    /// or out of order. Those cases are counted.
    pub fn process_scan(&mut self, cloud: &TimedPointCloud) -> Result<Option<OdometryRecord>> {
        let started = Instant::now();
        if self.calibration.is_none() {
            self.counters.scans_before_calibration += 1;
            return Ok(None);
        }
        let t_k = cloud.stamp;
        let t_end = cloud.end_stamp();
        if self.records.last().is_some_and(|r| t_k <= r.stamp) {
            self.counters.scans_out_of_order += 1;
            return Ok(None);
        }
        let a = self.history.iter().rposition(|h| h.sample.stamp <= t_k);
        let c = self.history.iter().position(|h| h.sample.stamp >= t_end);
        let (Some(a), Some(c)) = (a, c) else {
            self.counters.scans_without_imu += 1;
            return Ok(None);
        };
        let c = c.max(a + 1);
        if c >= self.history.len() {
            self.counters.scans_without_imu += 1;
            return Ok(None);
        }
        // last sample at or before the sweep end, where corrections land
        let b = if self.history[c].sample.stamp <= t_end {
            c
        } else {
            c - 1
        };

        let samples: Vec<ImuSample> = self.history.range(a..=c).map(|h| h.sample).collect();
        let traj = integrate_imu(&self.history[a].state, &samples)?;
        let prior = traj.query_pose(t_k)?;

        let cfg = &self.config;
        let filtered = filter_cloud(
            &to_robot_frame(cloud, &cfg.extrinsics.lidar_to_robot),
            &cfg.filter,
        );
        let mut record = OdometryRecord {
            stamp: t_k,
            pose: prior,
            velocity: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
            gyro_bias: Vec3::zeros(),
            processing_ms: 0.0,
            gicp_iterations: 0,
            correspondences: 0,
            points: filtered.cloud.len(),
            deskew_clamped: 0,
            keyframe: false,
            status: ScanStatus::EmptyScan,
        };

        if filtered.is_empty_scan() {
            self.counters.empty_scans += 1;
        } else {
            let deskewed = deskew_mode(&filtered.cloud, &traj, &Pose::identity(), cfg.deskew);
            record.deskew_clamped = deskewed.clamped;
            let points = deskewed.cloud.positions();
            let covs = match estimate_covariances(&points, cfg.gicp.k_neighbors, cfg.gicp.epsilon) {
                Ok(c) => Some(c),
                Err(Error::NotEnoughPoints { .. }) => None,
                Err(e) => return Err(e),
            };
            match covs {
                None => {
                    record.status = ScanStatus::Degenerate;
                    self.counters.degenerate_scans += 1;
                }
                Some(covs) if self.map.is_empty() => {
                    self.map.insert_keyframe(prior, deskewed.cloud, covs)?;
                    self.last_correction = Some(self.history[b].sample.stamp);
                    record.keyframe = true;
                    record.status = ScanStatus::Bootstrap;
                }
                Some(covs) => {
                    let submap = self.map.extract_submap(&prior, cfg.n_nearest);
                    let target = GicpTarget::new(&submap.points, &submap.covariances)?;
                    match align_to(&points, &covs, &target, &cfg.gicp) {
                        Ok(res) => {
                            record.gicp_iterations = res.iterations;
                            record.correspondences = res.correspondences;
                            record.status = ScanStatus::Registered;
                            record.pose = refine_pose(&prior, &res.delta);

                            let s_b = self.history[b].sample.stamp;
                            let measured = refine_pose(&traj.query_pose(s_b)?, &res.delta);
                            let dt_k = s_b - self.last_correction.unwrap_or(t_k);
                            if dt_k > 0.0 {
                                let corrected = observer::update(
                                    &self.history[b].state,
                                    &measured,
                                    dt_k,
                                    &cfg.gains,
                                )?;
                                self.history[b].state = corrected;
                                self.last_correction = Some(s_b);
                                self.repropagate(b)?;
                            }

                            if self.map.is_keyframe(&record.pose, &self.config.keyframes) {
                                self.map.insert_keyframe(
                                    record.pose,
                                    deskewed.cloud.transformed(&res.delta),
                                    covs.rotated(&res.delta.orientation),
                                )?;
                                record.keyframe = true;
                            }
                        }
                        Err(Error::DegenerateRegistration { .. }) => {
                            record.status = ScanStatus::Degenerate;
                            self.counters.degenerate_scans += 1;
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        }

        let state = self.history[b].state;
        record.velocity = state.velocity;
        record.accel_bias = state.accel_bias;
        record.gyro_bias = state.gyro_bias;
        self.history.drain(..a);
        record.processing_ms = started.elapsed().as_secs_f64() * 1e3;
        self.records.push(record);
        Ok(Some(record))
    }

    /// Scans whose sweep never got IMU coverage are counted.
    pub fn finish(&mut self, unprocessed_scans: usize) {
        self.counters.scans_without_imu += unprocessed_scans;
    }
}

/// Runs the whole dataset through a fresh [`Odometry`].
pub fn run_dataset(dataset: &Dataset, config: &PipelineConfig) -> Result<Odometry> {
    let mut odom = Odometry::new(config.clone())?;
    let mut next_scan = 0;
    for sample in &dataset.imu {
        odom.process_imu(sample)?;
        while let Some(scan) = dataset.scans.get(next_scan) {
            if scan.end_stamp() > sample.stamp {
                break;
            }
            odom.process_scan(scan)?;
            next_scan += 1;
        }
    }
    odom.finish(dataset.scans.len() - next_scan);
    Ok(odom)
}

/// Dataset extrinsics first, then the config file on top.
pub fn config_for_dataset(
    meta: &DatasetMeta,
    config_file: Option<&Path>,
) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig {
        extrinsics: meta.extrinsics,
        ..PipelineConfig::default()
    };
    if let Some(path) = config_file {
        cfg.apply(&KvFile::read(path)?)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn format_records(records: &[OdometryRecord]) -> String {
    let mut out = String::from(
        "stamp_s,status,processing_ms,gicp_iterations,correspondences,points,deskew_clamped,keyframe,\
         vx,vy,vz,bax,bay,baz,bgx,bgy,bgz\n",
    );
    for r in records {
        out.push_str(&format!(
            "{:.6},{},{:.3},{},{},{},{},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
            r.stamp,
            r.status,
            r.processing_ms,
            r.gicp_iterations,
            r.correspondences,
            r.points,
            r.deskew_clamped,
            u8::from(r.keyframe),
            r.velocity.x,
            r.velocity.y,
            r.velocity.z,
            r.accel_bias.x,
            r.accel_bias.y,
            r.accel_bias.z,
            r.gyro_bias.x,
            r.gyro_bias.y,
            r.gyro_bias.z,
        ));
    }
    out
}

/// Processing times from a records file written by [`format_records`].
pub fn read_record_timings(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let col = r
        .headers()?
        .iter()
        .position(|h| h == "processing_ms")
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no processing_ms column".into(),
        })?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let v = rec
            .get(col)
            .unwrap_or("")
            .parse::<f64>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: e.to_string(),
            })?;
        out.push(v);
    }
    Ok(out)
}

pub const TRAJECTORY_FILE: &str = "trajectory.tum";
pub const RECORDS_FILE: &str = "records.csv";
pub const MAP_FILE: &str = "map.ply";

/// Writes trajectory, per-scan records, the effective config and the map.
pub fn write_outputs(odom: &Odometry, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_tum(&out_dir.join(TRAJECTORY_FILE), &odom.trajectory())?;
    let records = out_dir.join(RECORDS_FILE);
    std::fs::write(&records, format_records(odom.records())).map_err(|e| Error::io(&records, e))?;
    let cfg = out_dir.join("config.effective");
    std::fs::write(&cfg, odom.config().to_kv_string()).map_err(|e| Error::io(&cfg, e))?;
    let map = odom.map().export_map(odom.config().map_voxel_leaf);
    write_ply_file(&out_dir.join(MAP_FILE), &map.positions())
}
