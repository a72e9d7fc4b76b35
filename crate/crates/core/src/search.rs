//! Nearest-neighbour queries over a static point set.

use std::num::NonZeroUsize;

use kiddo::{ImmutableKdTree, SquaredEuclidean};

use crate::geometry::Vec3;

/// k-d tree over a borrowed point slice; query results index into it.
pub struct PointIndex {
    tree: ImmutableKdTree<f64, 3>,
    len: usize,
}

impl PointIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        Self {
            tree: ImmutableKdTree::new_from_slice(&coords),
            len: points.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Closest point as `(index, squared distance)`.
    pub fn nearest(&self, query: &Vec3) -> Option<(usize, f64)> {
        if self.len == 0 {
            return None;
        }
        let n = self
            .tree
            .nearest_one::<SquaredEuclidean>(&[query.x, query.y, query.z]);
        Some((n.item as usize, n.distance))
    }

    /// Indices of the `k` closest points, nearest first.
    pub fn knn(&self, query: &Vec3, k: usize) -> Vec<usize> {
        let Some(k) = NonZeroUsize::new(k.min(self.len)) else {
            return Vec::new();
        };
        self.tree
            .nearest_n::<SquaredEuclidean>(&[query.x, query.y, query.z], k)
            .into_iter()
            .map(|n| n.item as usize)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_nearest(points: &[Vec3], q: &Vec3) -> f64 {
        points
            .iter()
            .map(|p| (p - q).norm_squared())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn matches_brute_force() {
        // lots of shared coordinates, like points sampled on axis-aligned planes
        let points: Vec<Vec3> = (0..2000)
            .map(|i| {
                let f = i as f64;
                Vec3::new(
                    (i % 20) as f64 * 0.1,
                    ((i / 20) % 10) as f64 * 0.1,
                    (f * 0.7).sin().round(),
                )
            })
            .collect();
        let index = PointIndex::new(&points);
        for j in 0..200 {
            let f = j as f64;
            let q = Vec3::new((f * 0.31).sin() * 2.0, (f * 0.17).cos(), (f * 0.05).sin());
            let (i, d2) = index.nearest(&q).unwrap();
            assert!((d2 - brute_nearest(&points, &q)).abs() < 1e-12);
            assert!(((points[i] - q).norm_squared() - d2).abs() < 1e-12);
        }
        let nn = index.knn(&points[0], 5);
        assert_eq!(nn.len(), 5);
        assert_eq!((points[nn[0]] - points[0]).norm(), 0.0);
    }

    #[test]
    fn empty_index() {
        let index = PointIndex::new(&[]);
        assert!(index.nearest(&Vec3::zeros()).is_none());
        assert!(index.knn(&Vec3::zeros(), 3).is_empty());
    }
}
