//! Simulates the 30 s room loop and runs the full odometry pipeline on it.
//!
//! cargo run --release --example odometry_run -- [seed] [none|discrete|continuous]

use std::time::Instant;

use lio::deskew::DeskewMode;
use lio::metrics::{ate_rmse, end_to_end_error, timing_stats};
use lio::pipeline::run_dataset;
use lio::scenario::Scenario;
use lio::PipelineConfig;

fn main() -> lio::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args
        .next()
        .map_or(Ok(1), |s| s.parse())
        .expect("seed must be an integer");
    let mode: DeskewMode = args
        .next()
        .map_or(Ok(DeskewMode::Continuous), |s| s.parse())?;

    let t = Instant::now();
    let scenario = Scenario::sinusoid_room(seed);
    let ds = scenario.simulate()?;
    println!(
        "simulated {} scans in {:.2} s",
        ds.scans.len(),
        t.elapsed().as_secs_f64()
    );

    let cfg = PipelineConfig {
        extrinsics: ds.meta.extrinsics,
        deskew: mode,
        ..PipelineConfig::default()
    };
    let t = Instant::now();
    let odom = run_dataset(&ds, &cfg)?;
    let wall = t.elapsed().as_secs_f64();

    let est = odom.trajectory();
    let times: Vec<f64> = odom.records().iter().map(|r| r.processing_ms).collect();
    let timing = timing_stats(&times).expect("at least one scan");
    println!(
        "mode {mode}: {} poses, {} keyframes, wall {wall:.2} s",
        est.len(),
        odom.map().len()
    );
    println!("ATE RMSE        {:.4} m", ate_rmse(&est, &ds.ground_truth)?);
    println!("end-to-end      {:.4} m", end_to_end_error(&est)?);
    println!(
        "scan time       mean {:.1} ms, p95 {:.1} ms",
        timing.mean_ms, timing.p95_ms
    );
    println!("counters        {:?}", odom.counters());
    Ok(())
}
