//! Builds a keyframe map from a simulated run and exports it as PLY.
//!
//! cargo run --release --example keyframe_map -- [out.ply]

use std::path::PathBuf;

use lio::map::write_ply_file;
use lio::pipeline::run_dataset;
use lio::scenario::Scenario;
use lio::PipelineConfig;

fn main() -> lio::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "map.ply".into()));
    let mut scenario = Scenario::sinusoid_room(3);
    scenario.trajectory.duration = 12.0;
    let ds = scenario.simulate()?;
    let cfg = PipelineConfig {
        extrinsics: ds.meta.extrinsics,
        ..PipelineConfig::default()
    };
    let odom = run_dataset(&ds, &cfg)?;
    let map = odom.map();
    for kf in map.keyframes() {
        let p = kf.pose.position;
        println!(
            "keyframe {:3} at ({:6.2}, {:6.2}, {:5.2}), {} points",
            kf.id,
            p.x,
            p.y,
            p.z,
            kf.cloud.len()
        );
    }
    if let Some(state) = odom.state() {
        let submap = map.extract_submap(&state.pose(), cfg.n_nearest);
        println!(
            "submap around final pose: {} keyframes, {} points",
            submap.keyframe_ids.len(),
            submap.points.len()
        );
    }
    let exported = map.export_map(cfg.map_voxel_leaf);
    write_ply_file(&out, &exported.positions())?;
    println!("wrote {} points to {}", exported.len(), out.display());
    Ok(())
}
