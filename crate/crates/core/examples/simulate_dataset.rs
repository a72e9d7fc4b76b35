//! Writes a simulated dataset directory that `lio run` can consume.
//!
//! cargo run --release --example simulate_dataset -- <out dir> [seconds] [seed]

use std::path::PathBuf;

use lio::scenario::Scenario;

fn main() -> lio::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "sim_dataset".into()));
    let duration: f64 = args.next().map_or(10.0, |s| s.parse().expect("seconds"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let mut scenario = Scenario::sinusoid_room(seed);
    scenario.trajectory.duration = duration;
    let ds = scenario.simulate()?;
    ds.write(&out)?;
    let points: usize = ds.scans.iter().map(|s| s.len()).sum();
    println!(
        "{}: {} IMU samples, {} scans, {} points",
        out.display(),
        ds.imu.len(),
        ds.scans.len(),
        points
    );
    Ok(())
}
