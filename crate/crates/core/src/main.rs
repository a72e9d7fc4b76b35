use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lio::dataset::{read_ground_truth, Dataset};
use lio::deskew::DeskewMode;
use lio::metrics::{ate_rmse, end_to_end_error, read_tum, timing_stats, StampedPose};
use lio::pipeline::{
    config_for_dataset, read_record_timings, run_dataset, write_outputs, RECORDS_FILE,
};
use lio::scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "lio",
    version,
    about = "LiDAR-inertial odometry on recorded or simulated data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset directory from a scenario file.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run odometry over a dataset directory.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config file.
        #[arg(long)]
        deskew: Option<DeskewMode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare an estimated TUM trajectory with ground truth.
    Evaluate {
        #[arg(long)]
        est: PathBuf,
        /// `ground_truth.csv` from a dataset, or a TUM file.
        #[arg(long)]
        gt: PathBuf,
    },
}

fn read_truth(path: &Path) -> lio::Result<Vec<StampedPose>> {
    if path.extension().is_some_and(|e| e == "csv") {
        read_ground_truth(path)
    } else {
        read_tum(path)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> lio::Result<()> {
    match cli.command {
        Command::Simulate { spec, out, seed } => {
            let scenario = Scenario::from_file(&spec, seed)?;
            let ds = scenario.simulate()?;
            ds.write(&out)?;
            println!(
                "wrote {} IMU samples and {} scans to {}",
                ds.imu.len(),
                ds.scans.len(),
                out.display()
            );
        }
        Command::Run {
            dataset,
            config,
            deskew,
            out,
        } => {
            let ds = Dataset::read(&dataset)?;
            let mut cfg = config_for_dataset(&ds.meta, config.as_deref())?;
            if let Some(mode) = deskew {
                cfg.deskew = mode;
            }
            let odom = run_dataset(&ds, &cfg)?;
            write_outputs(&odom, &out)?;
            let c = odom.counters();
            println!(
                "{} poses, {} keyframes, deskew {}; skipped {} before calibration, {} without IMU, {} degenerate, {} empty",
                odom.records().len(),
                odom.map().len(),
                cfg.deskew,
                c.scans_before_calibration,
                c.scans_without_imu,
                c.degenerate_scans,
                c.empty_scans
            );
        }
        Command::Evaluate { est, gt } => {
            let estimate = read_tum(&est)?;
            let truth = read_truth(&gt)?;
            let ate = ate_rmse(&estimate, &truth)?;
            let e2e = end_to_end_error(&estimate)?;
            println!("poses:               {}", estimate.len());
            println!("ATE RMSE:            {ate:.6} m");
            println!("end-to-end error:    {e2e:.6} m");
            let records = est.with_file_name(RECORDS_FILE);
            let timing = if records.exists() {
                timing_stats(&read_record_timings(&records)?)
            } else {
                None
            };
            if let Some(t) = timing {
                println!("scan time mean/p95:  {:.2} / {:.2} ms", t.mean_ms, t.p95_ms);
            }
            println!("ate_rmse_m={ate:.9}");
            println!("end_to_end_m={e2e:.9}");
            if let Some(t) = timing {
                println!("timing_mean_ms={:.3}", t.mean_ms);
                println!("timing_p95_ms={:.3}", t.p95_ms);
            }
        }
    }
    Ok(())
}
