//! Keyframe map: admission, submap extraction and export.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::gicp::PointCovariances;
use crate::preprocess::voxel_first_in_time;
use crate::types::TimedPointCloud;

#[derive(Clone, Debug)]
pub struct Keyframe {
    pub id: usize,
    pub pose: Pose,
    /// Deskewed, registered cloud in the world frame.
    pub cloud: TimedPointCloud,
    /// Cached per-point covariances, world frame.
    pub covariances: PointCovariances,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyframeThresholds {
    /// Metres.
    pub dist: f64,
    /// Radians.
    pub angle: f64,
}

impl Default for KeyframeThresholds {
    fn default() -> Self {
        Self {
            dist: 1.0,
            angle: 30f64.to_radians(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct KeyframeMap {
    keyframes: Vec<Keyframe>,
    next_id: usize,
}

/// Union of the selected keyframes.
#[derive(Clone, Debug, Default)]
pub struct Submap {
    pub points: Vec<Vec3>,
    pub covariances: PointCovariances,
    pub keyframe_ids: Vec<usize>,
}

impl KeyframeMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.keyframes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty()
    }

    pub fn keyframes(&self) -> &[Keyframe] {
        &self.keyframes
    }

    /// Total number of points over all keyframes.
    pub fn point_count(&self) -> usize {
        self.keyframes.iter().map(|k| k.cloud.len()).sum()
    }

    /// A pose becomes a keyframe when it is far enough from the nearest
    /// existing keyframe, in translation or rotation.
    pub fn is_keyframe(&self, pose: &Pose, thresholds: &KeyframeThresholds) -> bool {
        let Some(nearest) = self.keyframes.iter().min_by(|a, b| {
            a.pose
                .translation_distance(pose)
                .total_cmp(&b.pose.translation_distance(pose))
        }) else {
            return true;
        };
        nearest.pose.translation_distance(pose) >= thresholds.dist
            || nearest.pose.rotation_angle_to(pose) >= thresholds.angle
    }

    /// Appends a keyframe and returns its id.
    pub fn insert_keyframe(
        &mut self,
        pose: Pose,
        cloud: TimedPointCloud,
        covariances: PointCovariances,
    ) -> Result<usize> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if covariances.len() != cloud.len() {
            return Err(Error::invalid(
                "keyframe covariances",
                "length differs from cloud",
            ));
        }
        let id = self.next_id;
        self.next_id += 1;
        self.keyframes.push(Keyframe {
            id,
            pose,
            cloud,
            covariances,
        });
        Ok(id)
    }

    /// Concatenates the `n_nearest` keyframes closest to `pose`, nearest
    /// first, ties broken by lower id.
    pub fn extract_submap(&self, pose: &Pose, n_nearest: usize) -> Submap {
        let mut order: Vec<(f64, usize, usize)> = self
            .keyframes
            .iter()
            .enumerate()
            .map(|(i, k)| (k.pose.translation_distance(pose), k.id, i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.truncate(n_nearest);

        let total: usize = order
            .iter()
            .map(|&(_, _, i)| self.keyframes[i].cloud.len())
            .sum();
        let mut submap = Submap {
            points: Vec::with_capacity(total),
            covariances: PointCovariances::default(),
            keyframe_ids: Vec::with_capacity(order.len()),
        };
        for &(_, id, i) in &order {
            let k = &self.keyframes[i];
            submap.points.extend(k.cloud.points().iter().map(|p| p.xyz));
            submap.covariances.extend(&k.covariances);
            submap.keyframe_ids.push(id);
        }
        submap
    }

    /// All keyframe clouds concatenated in id order, optionally voxelised.
    pub fn export_map(&self, voxel_leaf: f64) -> TimedPointCloud {
        let mut out = TimedPointCloud::empty(self.keyframes.first().map_or(0.0, |k| k.cloud.stamp));
        for k in &self.keyframes {
            out.extend_unsorted(&k.cloud);
        }
        if voxel_leaf > 0.0 {
            let kept = voxel_first_in_time(out.points(), voxel_leaf);
            return TimedPointCloud::from_unsorted(out.stamp, kept);
        }
        out
    }
}

/// Writes points as a binary little-endian PLY with float32 `x y z`.
pub fn write_ply<W: Write>(mut out: W, points: &[Vec3]) -> std::io::Result<()> {
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    )?;
    let mut buf = Vec::with_capacity(points.len() * 12);
    for p in points {
        for v in [p.x, p.y, p.z] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    out.flush()
}

pub fn write_ply_file(path: &Path, points: &[Vec3]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_ply(std::io::BufWriter::new(file), points).map_err(|e| Error::io(path, e))
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::types::TimedPoint;
    use proptest::prelude::*;

    fn sorted_points(points: &[Vec3]) -> Vec<[u64; 3]> {
        let mut v: Vec<[u64; 3]> = points
            .iter()
            .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
            .collect();
        v.sort_unstable();
        v
    }

    fn keyframe_cloud(x: f64, n: usize) -> TimedPointCloud {
        TimedPointCloud::new(
            0.0,
            (0..n)
                .map(|i| TimedPoint::new(Vec3::new(x, i as f64 * 0.1, 1.0), 0.0))
                .collect(),
        )
    }

    fn build(positions: &[(f64, usize)]) -> KeyframeMap {
        let mut map = KeyframeMap::new();
        for &(x, n) in positions {
            map.insert_keyframe(
                Pose::from_translation(Vec3::new(x, 0.0, 0.0)),
                keyframe_cloud(x, n),
                PointCovariances::identity(n),
            )
            .unwrap();
        }
        map
    }

    proptest! {
        #[test]
        fn submap_ignores_insertion_order(
            xs in prop::collection::btree_set(-500i32..500, 2..12),
            sizes in prop::collection::vec(1usize..6, 12),
            query in -60.0..60.0f64,
            n in 1usize..8,
            seed in any::<u64>(),
        ) {
            let entries: Vec<(f64, usize)> = xs.iter().zip(&sizes).map(|(&x, &s)| (x as f64 * 0.1 + 0.013, s)).collect();
            let mut shuffled = entries.clone();
            let len = shuffled.len();
            for i in (1..len).rev() {
                shuffled.swap(i, (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize);
            }
            let pose = Pose::from_translation(Vec3::new(query, 0.0, 0.0));
            let a = build(&entries).extract_submap(&pose, n);
            let b = build(&shuffled).extract_submap(&pose, n);
            prop_assert_eq!(sorted_points(&a.points), sorted_points(&b.points));
        }

        #[test]
        fn full_submap_is_whole_map(xs in prop::collection::vec(-20.0..20.0f64, 1..10), query in -20.0..20.0f64) {
            let entries: Vec<(f64, usize)> = xs.iter().map(|&x| (x, 3)).collect();
            let map = build(&entries);
            let sub = map.extract_submap(&Pose::from_translation(Vec3::new(query, 0.0, 0.0)), entries.len());
            prop_assert_eq!(sorted_points(&sub.points), sorted_points(&map.export_map(0.0).positions()));
        }
    }
}
