//! Dataset directories on disk.
//!
//! ```text
//! <dir>/imu.csv            stamp_s,ax,ay,az,gx,gy,gz
//! <dir>/scans/index.csv    scan_id,stamp_s
//! <dir>/scans/NNNNNN.csv   x,y,z,dt_s
//! <dir>/ground_truth.csv   stamp_s,tx,ty,tz,qw,qx,qy,qz
//! <dir>/meta               key = value
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Quaternion, Vec3};
use crate::kv::{fmt_quaternion, fmt_vec3, format_entries, KvFile};
use crate::metrics::StampedPose;
use crate::preprocess::Extrinsics;
use crate::types::{ImuSample, TimedPoint, TimedPointCloud};

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub imu_rate: f64,
    pub lidar_rate: f64,
    pub extrinsics: Extrinsics,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        Self {
            imu_rate: 100.0,
            lidar_rate: 10.0,
            extrinsics: Extrinsics::default(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub imu: Vec<ImuSample>,
    pub scans: Vec<TimedPointCloud>,
    pub ground_truth: Vec<StampedPose>,
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() != columns {
            return Err(err(format!(
                "expected {columns} columns, got {}",
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("`{f}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn scan_path(dir: &Path, id: usize) -> PathBuf {
    dir.join("scans").join(format!("{id:06}.csv"))
}

impl DatasetMeta {
    fn to_kv_string(&self) -> String {
        let e = &self.extrinsics;
        format_entries(&[
            ("imu_rate", self.imu_rate.to_string()),
            ("lidar_rate", self.lidar_rate.to_string()),
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
        ])
    }

    fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut meta = Self::default();
        if let Some(r) = kv.get("imu_rate")? {
            meta.imu_rate = r;
        }
        if let Some(r) = kv.get("lidar_rate")? {
            meta.lidar_rate = r;
        }
        kv.pose_into("extrinsics.lidar", &mut meta.extrinsics.lidar_to_robot)?;
        kv.pose_into("extrinsics.imu", &mut meta.extrinsics.imu_to_robot)?;
        Ok(meta)
    }
}

impl Dataset {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("scans")).map_err(|e| Error::io(dir, e))?;
        let meta_path = dir.join("meta");
        fs::write(&meta_path, self.meta.to_kv_string()).map_err(|e| Error::io(&meta_path, e))?;

        write_csv(
            &dir.join("imu.csv"),
            &["stamp_s", "ax", "ay", "az", "gx", "gy", "gz"],
            self.imu.iter().map(|s| {
                vec![
                    s.stamp, s.accel.x, s.accel.y, s.accel.z, s.gyro.x, s.gyro.y, s.gyro.z,
                ]
            }),
        )?;
        write_csv(
            &dir.join("ground_truth.csv"),
            &["stamp_s", "tx", "ty", "tz", "qw", "qx", "qy", "qz"],
            self.ground_truth.iter().map(|g| {
                let (p, q) = (&g.pose.position, &g.pose.orientation);
                vec![g.stamp, p.x, p.y, p.z, q.w, q.x, q.y, q.z]
            }),
        )?;

        let index = dir.join("scans").join("index.csv");
        let mut w = csv::Writer::from_path(&index)?;
        w.write_record(["scan_id", "stamp_s"])?;
        for (id, scan) in self.scans.iter().enumerate() {
            w.write_record([id.to_string(), scan.stamp.to_string()])?;
            write_csv(
                &scan_path(dir, id),
                &["x", "y", "z", "dt_s"],
                scan.points()
                    .iter()
                    .map(|p| vec![p.xyz.x, p.xyz.y, p.xyz.z, p.dt]),
            )?;
        }
        w.flush().map_err(|e| Error::io(&index, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta");
        let meta = if meta_path.exists() {
            DatasetMeta::from_kv(&KvFile::read(&meta_path)?)?
        } else {
            DatasetMeta::default()
        };
        let imu = read_csv(&dir.join("imu.csv"), 7)?
            .into_iter()
            .map(|r| {
                ImuSample::new(
                    r[0],
                    Vec3::new(r[1], r[2], r[3]),
                    Vec3::new(r[4], r[5], r[6]),
                )
            })
            .collect();
        let gt_path = dir.join("ground_truth.csv");
        let ground_truth = if gt_path.exists() {
            read_ground_truth(&gt_path)?
        } else {
            Vec::new()
        };
        let index_path = dir.join("scans").join("index.csv");
        let mut scans = Vec::new();
        for row in read_csv(&index_path, 2)? {
            let id = row[0];
            if id < 0.0 || id.fract() != 0.0 {
                return Err(Error::Parse {
                    path: index_path.clone(),
                    line: scans.len() + 2,
                    message: format!("bad scan id {id}"),
                });
            }
            let points = read_csv(&scan_path(dir, id as usize), 4)?
                .into_iter()
                .map(|r| TimedPoint::new(Vec3::new(r[0], r[1], r[2]), r[3]))
                .collect();
            scans.push(TimedPointCloud::new(row[1], points));
        }
        Ok(Self {
            meta,
            imu,
            scans,
            ground_truth,
        })
    }
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<StampedPose>> {
    Ok(read_csv(path, 8)?
        .into_iter()
        .map(|r| {
            let q = Quaternion::new(r[4], r[5], r[6], r[7]).normalized();
            StampedPose::new(r[0], Pose::new(Vec3::new(r[1], r[2], r[3]), q))
        })
        .collect())
}
