//! Plane-to-plane Generalized-ICP.
//!
//! Minimises `sum_c d_c^T (C_S + R C_P R^T)^-1 d_c` over a rigid correction
//! `delta` applied to the (already prior-transformed) source cloud, with
//! `d_c = s_c - delta * p_c`. Per-point covariances are regularised to
//! eigenvalues `(1, 1, epsilon)`, which turns the objective into a
//! plane-to-plane distance.

use nalgebra::{Matrix3, Matrix6, Vector6};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{skew, Pose, Quaternion, Vec3};
use crate::search::PointIndex;

/// Correspondences are accumulated in chunks of this size; the partial sums
/// are then added in chunk order so results do not depend on thread timing.
const ACCUMULATE_CHUNK: usize = 1024;
/// Maximum step halvings in the line search.
const MAX_HALVINGS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GicpParams {
    pub k_neighbors: usize,
    pub epsilon: f64,
    pub max_corr_dist: f64,
    pub max_iterations: usize,
    /// Gauss-Newton steps per correspondence set.
    pub inner_iterations: usize,
    pub trans_eps: f64,
    pub rot_eps: f64,
    pub min_correspondences: usize,
}

impl Default for GicpParams {
    fn default() -> Self {
        Self {
            k_neighbors: 10,
            epsilon: 1e-3,
            max_corr_dist: 0.5,
            max_iterations: 32,
            inner_iterations: 3,
            trans_eps: 1e-4,
            rot_eps: 1e-4,
            min_correspondences: 20,
        }
    }
}

impl GicpParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 4 {
            return Err(Error::invalid("gicp.k_neighbors", "must be >= 4"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::invalid("gicp.epsilon", "must be in (0, 1]"));
        }
        if !(self.max_corr_dist > 0.0) {
            return Err(Error::invalid("gicp.max_corr_dist", "must be > 0"));
        }
        if self.max_iterations == 0 || self.inner_iterations == 0 {
            return Err(Error::invalid("gicp.max_iterations", "must be > 0"));
        }
        if !(self.trans_eps > 0.0 && self.rot_eps > 0.0) {
            return Err(Error::invalid("gicp.trans_eps", "thresholds must be > 0"));
        }
        Ok(())
    }
}

/// Per-point 3x3 covariances parallel to a cloud.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCovariances {
    covs: Vec<Matrix3<f64>>,
    /// Points whose neighbourhood had rank < 2 and fell back to identity.
    pub degenerate: usize,
}

impl PointCovariances {
    pub fn from_vec(covs: Vec<Matrix3<f64>>) -> Self {
        Self {
            covs,
            degenerate: 0,
        }
    }

    /// Unregularised identity covariances; turns GICP into point-to-point ICP.
    pub fn identity(n: usize) -> Self {
        Self::from_vec(vec![Matrix3::identity(); n])
    }

    pub fn as_slice(&self) -> &[Matrix3<f64>] {
        &self.covs
    }

    pub fn len(&self) -> usize {
        self.covs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covs.is_empty()
    }

    /// Covariances of the same points after rotating them by `q`.
    pub fn rotated(&self, q: &Quaternion) -> Self {
        let r = q.to_rotation_matrix();
        Self {
            covs: self.covs.iter().map(|c| r * c * r.transpose()).collect(),
            degenerate: self.degenerate,
        }
    }

    pub fn extend(&mut self, other: &PointCovariances) {
        self.covs.extend_from_slice(&other.covs);
        self.degenerate += other.degenerate;
    }
}

/// Sample covariance of each point's `k` nearest neighbours (itself
/// included), regularised to eigenvalues `(1, 1, epsilon)`.
pub fn estimate_covariances(points: &[Vec3], k: usize, epsilon: f64) -> Result<PointCovariances> {
    if k < 4 {
        return Err(Error::invalid("k_neighbors", "must be >= 4"));
    }
    if points.len() < k {
        return Err(Error::NotEnoughPoints {
            required: k,
            found: points.len(),
        });
    }
    let index = PointIndex::new(points);
    let regularized: Vec<Option<Matrix3<f64>>> = points
        .par_iter()
        .map(|p| {
            let nn = index.knn(p, k);
            let n = nn.len() as f64;
            let mean = nn.iter().fold(Vec3::zeros(), |acc, &i| acc + points[i]) / n;
            let cov = nn.iter().fold(Matrix3::zeros(), |acc, &i| {
                let d = points[i] - mean;
                acc + d * d.transpose()
            }) / n;
            regularize_plane(&cov, epsilon)
        })
        .collect();
    let degenerate = regularized.iter().filter(|c| c.is_none()).count();
    Ok(PointCovariances {
        covs: regularized
            .into_iter()
            .map(|c| c.unwrap_or_else(Matrix3::identity))
            .collect(),
        degenerate,
    })
}

/// Replaces the eigenvalues of `cov` by `(1, 1, epsilon)`, keeping the
/// eigenvector of the smallest eigenvalue as the surface normal. Returns
/// `None` for neighbourhoods of rank < 2, where no plane is defined.
pub fn regularize_plane(cov: &Matrix3<f64>, epsilon: f64) -> Option<Matrix3<f64>> {
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    let middle = eig.eigenvalues[order[1]];
    if !(largest > 1e-18) || middle <= 1e-9 * largest {
        return None;
    }
    let normal: Vec3 = eig.eigenvectors.column(order[0]).normalize();
    Some(Matrix3::identity() - (1.0 - epsilon) * normal * normal.transpose())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub src_index: usize,
    pub tgt_index: usize,
    pub squared_distance: f64,
}

/// Registration target: submap points, their covariances and a search index.
pub struct GicpTarget<'a> {
    points: &'a [Vec3],
    covs: &'a [Matrix3<f64>],
    index: PointIndex,
}

impl<'a> GicpTarget<'a> {
    pub fn new(points: &'a [Vec3], covs: &'a PointCovariances) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if covs.len() != points.len() {
            return Err(Error::invalid(
                "target covariances",
                "length differs from cloud",
            ));
        }
        Ok(Self {
            points,
            covs: covs.as_slice(),
            index: PointIndex::new(points),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignResult {
    /// Correction to left-multiply onto the source cloud.
    pub delta: Pose,
    pub final_cost: f64,
    /// Outer (correspondence) iterations performed.
    pub iterations: usize,
    pub converged: bool,
    pub correspondences: usize,
    /// Pose change over the final outer iteration.
    pub last_translation_step: f64,
    pub last_rotation_step: f64,
}

/// Builds the target index and aligns `src` onto it.
pub fn align(
    src: &[Vec3],
    src_cov: &PointCovariances,
    tgt: &[Vec3],
    tgt_cov: &PointCovariances,
    params: &GicpParams,
) -> Result<AlignResult> {
    let target = GicpTarget::new(tgt, tgt_cov)?;
    align_to(src, src_cov, &target, params)
}

/// Gauss-Newton GICP against a prebuilt target, starting from identity.
pub fn align_to(
    src: &[Vec3],
    src_cov: &PointCovariances,
    target: &GicpTarget<'_>,
    params: &GicpParams,
) -> Result<AlignResult> {
    align_from(src, src_cov, target, params, &Pose::identity(), &mut |_| {})
}

/// Rigid transform as a rotation matrix and translation, used in the hot loop.
#[derive(Clone, Copy)]
struct Rigid {
    r: Matrix3<f64>,
    t: Vec3,
}

impl Rigid {
    fn from_pose(p: &Pose) -> Self {
        Self {
            r: p.rotation_matrix(),
            t: p.position,
        }
    }

    fn apply(&self, p: &Vec3) -> Vec3 {
        self.r * p + self.t
    }
}

/// Cost evaluations for the objective under fixed correspondences. Exposed
/// through the observer callback of [`align_from`] for testing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GicpEvent {
    /// New correspondence set found at the start of an outer iteration.
    Correspondences { outer: usize, count: usize },
    /// Accepted inner step: cost before and after.
    Step {
        outer: usize,
        before: f64,
        after: f64,
    },
}

/// Full-control variant of [`align_to`] with an initial guess and an event
/// callback.
pub fn align_from(
    src: &[Vec3],
    src_cov: &PointCovariances,
    target: &GicpTarget<'_>,
    params: &GicpParams,
    initial: &Pose,
    on_event: &mut dyn FnMut(GicpEvent),
) -> Result<AlignResult> {
    if src.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if src_cov.len() != src.len() {
        return Err(Error::invalid(
            "source covariances",
            "length differs from cloud",
        ));
    }
    let src_covs = src_cov.as_slice();
    let max_d2 = params.max_corr_dist * params.max_corr_dist;

    let mut pose = *initial;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_trans = f64::INFINITY;
    let mut last_rot = f64::INFINITY;
    let mut corr = Vec::new();

    for outer in 0..params.max_iterations {
        iterations = outer + 1;
        corr = find_correspondences(src, target, &Rigid::from_pose(&pose), max_d2);
        on_event(GicpEvent::Correspondences {
            outer,
            count: corr.len(),
        });
        if corr.len() < params.min_correspondences {
            return Err(Error::DegenerateRegistration {
                found: corr.len(),
                required: params.min_correspondences,
            });
        }

        let outer_start = pose;
        for _ in 0..params.inner_iterations {
            let rigid = Rigid::from_pose(&pose);
            let lin = linearize(src, src_covs, target, &corr, &rigid);
            let Some(step) = lin.h.cholesky().map(|c| c.solve(&(-lin.g))) else {
                break;
            };
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let s = step * scale;
                let trial = apply_increment(&pose, &s);
                let cost = evaluate(src, src_covs, target, &corr, &Rigid::from_pose(&trial));
                if cost <= lin.cost {
                    accepted = Some((trial, s, cost));
                    break;
                }
                scale *= 0.5;
            }
            match accepted {
                Some((trial, s, cost)) => {
                    on_event(GicpEvent::Step {
                        outer,
                        before: lin.cost,
                        after: cost,
                    });
                    pose = trial;
                    last_trans = s.fixed_rows::<3>(0).norm();
                    last_rot = s.fixed_rows::<3>(3).norm();
                }
                None => {
                    // no descent possible: at a minimum for these correspondences
                    last_trans = 0.0;
                    last_rot = 0.0;
                }
            }
            if last_trans < params.trans_eps && last_rot < params.rot_eps {
                break;
            }
        }

        // converged when re-association no longer moves the estimate
        let moved = pose.compose(&outer_start.inverse());
        last_trans = moved.position.norm();
        last_rot = moved.orientation.angle();
        if last_trans < params.trans_eps && last_rot < params.rot_eps {
            converged = true;
            break;
        }
    }

    let final_cost = evaluate(src, src_covs, target, &corr, &Rigid::from_pose(&pose));
    Ok(AlignResult {
        delta: pose,
        final_cost,
        iterations,
        converged,
        correspondences: corr.len(),
        last_translation_step: last_trans,
        last_rotation_step: last_rot,
    })
}

/// Globally refined pose: the registration correction applied on top of the
/// IMU-propagated pose.
pub fn refine_pose(prior_last: &Pose, delta: &Pose) -> Pose {
    delta.compose(prior_last)
}

fn find_correspondences(
    src: &[Vec3],
    target: &GicpTarget<'_>,
    pose: &Rigid,
    max_d2: f64,
) -> Vec<Correspondence> {
    src.par_iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let (j, d2) = target.index.nearest(&pose.apply(p))?;
            (d2 <= max_d2).then_some(Correspondence {
                src_index: i,
                tgt_index: j,
                squared_distance: d2,
            })
        })
        .collect()
}

/// Left-multiplicative update `exp(step) * pose`, `step = (rho, phi)`.
fn apply_increment(pose: &Pose, step: &Vector6<f64>) -> Pose {
    let rho = Vec3::new(step[0], step[1], step[2]);
    let phi = Vec3::new(step[3], step[4], step[5]);
    Pose::from_increment(&rho, &phi).compose(pose)
}

struct Linearization {
    h: Matrix6<f64>,
    g: Vector6<f64>,
    cost: f64,
}

fn mahalanobis(
    src: &[Vec3],
    src_covs: &[Matrix3<f64>],
    target: &GicpTarget<'_>,
    c: &Correspondence,
    pose: &Rigid,
) -> Option<(Vec3, Vec3, Matrix3<f64>)> {
    let moved = pose.apply(&src[c.src_index]);
    let d = target.points[c.tgt_index] - moved;
    let combined = target.covs[c.tgt_index] + pose.r * src_covs[c.src_index] * pose.r.transpose();
    let info = combined.try_inverse()?;
    Some((moved, d, info))
}

fn linearize(
    src: &[Vec3],
    src_covs: &[Matrix3<f64>],
    target: &GicpTarget<'_>,
    corr: &[Correspondence],
    pose: &Rigid,
) -> Linearization {
    let partials: Vec<Linearization> = corr
        .par_chunks(ACCUMULATE_CHUNK)
        .map(|chunk| {
            let mut acc = Linearization {
                h: Matrix6::zeros(),
                g: Vector6::zeros(),
                cost: 0.0,
            };
            for c in chunk {
                let Some((moved, d, info)) = mahalanobis(src, src_covs, target, c, pose) else {
                    continue;
                };
                // d(d)/d(rho, phi) = [-I, [moved]x]
                let mut j = nalgebra::Matrix3x6::<f64>::zeros();
                j.fixed_view_mut::<3, 3>(0, 0)
                    .copy_from(&(-Matrix3::identity()));
                j.fixed_view_mut::<3, 3>(0, 3).copy_from(&skew(&moved));
                let jt_info = j.transpose() * info;
                acc.h += jt_info * j;
                acc.g += jt_info * d;
                acc.cost += d.dot(&(info * d));
            }
            acc
        })
        .collect();
    partials.into_iter().fold(
        Linearization {
            h: Matrix6::zeros(),
            g: Vector6::zeros(),
            cost: 0.0,
        },
        |mut a, p| {
            a.h += p.h;
            a.g += p.g;
            a.cost += p.cost;
            a
        },
    )
}

fn evaluate(
    src: &[Vec3],
    src_covs: &[Matrix3<f64>],
    target: &GicpTarget<'_>,
    corr: &[Correspondence],
    pose: &Rigid,
) -> f64 {
    let partials: Vec<f64> = corr
        .par_chunks(ACCUMULATE_CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .filter_map(|c| mahalanobis(src, src_covs, target, c, pose))
                .map(|(_, d, info)| d.dot(&(info * d)))
                .sum::<f64>()
        })
        .collect();
    partials.into_iter().sum()
}
