//! Trajectory evaluation and TUM text I/O.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Quaternion, Vec3};

/// Largest stamp gap accepted when pairing estimate and truth.
pub const MAX_ASSOCIATION_GAP: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StampedPose {
    pub stamp: f64,
    pub pose: Pose,
}

impl StampedPose {
    pub fn new(stamp: f64, pose: Pose) -> Self {
        Self { stamp, pose }
    }
}

/// Index into `truth` (sorted by stamp) of the entry nearest to `stamp`,
/// or `None` if the gap exceeds `max_gap`. Ties go to the earlier entry.
pub fn nearest_stamp(truth: &[StampedPose], stamp: f64, max_gap: f64) -> Option<usize> {
    if truth.is_empty() {
        return None;
    }
    let i = truth.partition_point(|p| p.stamp < stamp);
    let candidates = [i.checked_sub(1), (i < truth.len()).then_some(i)];
    let best = candidates.into_iter().flatten().min_by(|&a, &b| {
        (truth[a].stamp - stamp)
            .abs()
            .total_cmp(&(truth[b].stamp - stamp).abs())
            .then(a.cmp(&b))
    })?;
    ((truth[best].stamp - stamp).abs() < max_gap).then_some(best)
}

/// Pairs of (estimate index, truth index).
pub fn associate(estimate: &[StampedPose], truth: &[StampedPose]) -> Vec<(usize, usize)> {
    estimate
        .iter()
        .enumerate()
        .filter_map(|(i, e)| nearest_stamp(truth, e.stamp, MAX_ASSOCIATION_GAP).map(|j| (i, j)))
        .collect()
}

/// Root-mean-square translational error over time-associated poses, in the
/// shared world frame with no alignment.
pub fn ate_rmse(estimate: &[StampedPose], truth: &[StampedPose]) -> Result<f64> {
    let pairs = associate(estimate, truth);
    if pairs.is_empty() {
        return Err(Error::NoAssociations);
    }
    let sum: f64 = pairs
        .iter()
        .map(|&(i, j)| (estimate[i].pose.position - truth[j].pose.position).norm_squared())
        .sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// Distance between first and last positions.
pub fn end_to_end_error(estimate: &[StampedPose]) -> Result<f64> {
    match (estimate.first(), estimate.last()) {
        (Some(a), Some(b)) if estimate.len() >= 2 => Ok((a.pose.position - b.pose.position).norm()),
        _ => Err(Error::TooFewSamples {
            required: 2,
            found: estimate.len(),
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingStats {
    pub count: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

/// Mean and nearest-rank 95th percentile.
pub fn timing_stats(samples_ms: &[f64]) -> Option<TimingStats> {
    if samples_ms.is_empty() {
        return None;
    }
    let mut sorted = samples_ms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    Some(TimingStats {
        count: n,
        mean_ms: sorted.iter().sum::<f64>() / n as f64,
        p95_ms: sorted[rank - 1],
        max_ms: sorted[n - 1],
    })
}

/// `stamp tx ty tz qx qy qz qw` per line.
pub fn format_tum(poses: &[StampedPose]) -> String {
    let mut out = String::with_capacity(poses.len() * 120);
    for p in poses {
        let (t, q) = (&p.pose.position, &p.pose.orientation);
        writeln!(
            out,
            "{:.6} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9}",
            p.stamp, t.x, t.y, t.z, q.x, q.y, q.z, q.w
        )
        .expect("writing to a String");
    }
    out
}

pub fn parse_tum(text: &str, path: &Path) -> Result<Vec<StampedPose>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|e| err(e.to_string())))
            .collect::<Result<_>>()?;
        if v.len() != 8 {
            return Err(err(format!("expected 8 columns, got {}", v.len())));
        }
        let q = Quaternion::new(v[7], v[4], v[5], v[6]);
        out.push(StampedPose::new(
            v[0],
            Pose::new(Vec3::new(v[1], v[2], v[3]), q.normalized()),
        ));
    }
    Ok(out)
}

pub fn write_tum(path: &Path, poses: &[StampedPose]) -> Result<()> {
    std::fs::write(path, format_tum(poses)).map_err(|e| Error::io(path, e))
}

pub fn read_tum(path: &Path) -> Result<Vec<StampedPose>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tum(&text, path)
}
