//! Motion-correction ablation on a fast spinning trajectory: the same data
//! run with no deskew, knot-wise deskew and continuous-time deskew.
//!
//! cargo run --release --example ablation -- [seconds] [seed]

use lio::deskew::DeskewMode;
use lio::metrics::ate_rmse;
use lio::pipeline::run_dataset;
use lio::scenario::Scenario;
use lio::PipelineConfig;

fn main() -> lio::Result<()> {
    let mut args = std::env::args().skip(1);
    let duration: f64 = args.next().map_or(20.0, |s| s.parse().expect("duration"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let ds = Scenario::aggressive_spin(duration, seed).simulate()?;
    println!(
        "{:<12} {:>10} {:>10} {:>10}",
        "deskew", "ATE [m]", "keyframes", "degenerate"
    );
    for mode in DeskewMode::ALL {
        let cfg = PipelineConfig {
            extrinsics: ds.meta.extrinsics,
            deskew: mode,
            ..PipelineConfig::default()
        };
        let odom = run_dataset(&ds, &cfg)?;
        let ate = ate_rmse(&odom.trajectory(), &ds.ground_truth)?;
        println!(
            "{:<12} {:>10.5} {:>10} {:>10}",
            mode.as_str(),
            ate,
            odom.map().len(),
            odom.counters().degenerate_scans
        );
    }
    Ok(())
}
