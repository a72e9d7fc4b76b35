//! Registers a simulated room scan against a perturbed copy of itself.
//!
//! cargo run --release --example gicp_register -- [seed]

use lio::gicp::{align_from, estimate_covariances, GicpEvent, GicpParams, GicpTarget};
use lio::preprocess::{filter_cloud, FilterSpec};
use lio::simulator::{render_sweep, LidarSpec, SceneSpec, TrajectoryKind, TrajectorySpec};
use lio::{Pose, Quaternion, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> lio::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map_or(7, |s| s.parse().expect("seed"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let spec = TrajectorySpec::new(TrajectoryKind::Static, 1.0);
    let sweep = render_sweep(
        &spec,
        &SceneSpec::box_room(20.0, 5.0, -1.5),
        &LidarSpec::default(),
        &Pose::identity(),
        0.0,
    )?;
    let src = filter_cloud(
        &sweep.reference,
        &FilterSpec {
            box_half_extent: 0.0,
            voxel_leaf: 0.25,
        },
    )
    .cloud
    .positions();

    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let truth = Pose::new(
        Vec3::new(
            rng.random_range(-0.1..0.1),
            rng.random_range(-0.1..0.1),
            rng.random_range(-0.05..0.05),
        ),
        Quaternion::from_axis_angle(&axis.normalize(), 4f64.to_radians()),
    );
    let tgt: Vec<Vec3> = src.iter().map(|p| truth.transform_point(p)).collect();

    let params = GicpParams::default();
    let src_cov = estimate_covariances(&src, params.k_neighbors, params.epsilon)?;
    let tgt_cov = estimate_covariances(&tgt, params.k_neighbors, params.epsilon)?;
    let target = GicpTarget::new(&tgt, &tgt_cov)?;

    let mut log = |e: GicpEvent| {
        if let GicpEvent::Correspondences { outer, count } = e {
            println!("  outer {outer:2}: {count} correspondences");
        }
    };
    let res = align_from(
        &src,
        &src_cov,
        &target,
        &params,
        &Pose::identity(),
        &mut log,
    )?;
    println!(
        "{} points, {} iterations, converged {}",
        src.len(),
        res.iterations,
        res.converged
    );
    println!(
        "translation error {:.2e} m, rotation error {:.2e} deg",
        (res.delta.position - truth.position).norm(),
        res.delta
            .orientation
            .angle_to(&truth.orientation)
            .to_degrees()
    );
    Ok(())
}
