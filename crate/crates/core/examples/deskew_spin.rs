//! Motion correction of one sweep taken during a fast spin.
//!
//! Renders a sweep on the aggressive-spin trajectory, builds the sweep
//! trajectory from the simulated IMU and compares each correction model
//! against the cloud the sensor would have seen had it stood still.
//!
//! cargo run --release --example deskew_spin -- [sweep start]

use lio::deskew::{deskew_mode, DeskewMode};
use lio::propagation::integrate_imu;
use lio::simulator::{
    render_sweep, sample_imu, LidarSpec, SceneSpec, SimNoiseSpec, TrajectorySpec,
};
use lio::{RobotState, Vec3};

fn main() -> lio::Result<()> {
    let t0: f64 = std::env::args()
        .nth(1)
        .map_or(4.5, |s| s.parse().expect("sweep start"));
    let spec = TrajectorySpec::aggressive_spin(8.0);
    let lidar = LidarSpec::default();
    let scene = SceneSpec::box_room(20.0, 5.0, -1.5);
    let imu = sample_imu(&spec, 100.0, &SimNoiseSpec::noiseless())?;
    let sweep = render_sweep(&spec, &scene, &lidar, &lio::Pose::identity(), t0)?;
    let t1 = t0 + lidar.sweep_period();

    let a = imu
        .iter()
        .rposition(|s| s.stamp <= t0 + 1e-12)
        .expect("sample before sweep");
    let c = imu
        .iter()
        .position(|s| s.stamp >= t1)
        .expect("sample after sweep");
    let k = spec.kinematics(imu[a].stamp);
    let start = RobotState {
        stamp: imu[a].stamp,
        velocity: k.velocity,
        ..RobotState::default()
    }
    .with_pose(&k.pose);
    let traj = integrate_imu(&start, &imu[a..=c])?;

    let reference = sweep.reference.positions();
    println!("sweep at {t0:.2} s, {} points", reference.len());
    for mode in DeskewMode::ALL {
        let out = deskew_mode(&sweep.distorted, &traj, &lio::Pose::identity(), mode);
        let sq: f64 = out
            .cloud
            .positions()
            .iter()
            .zip(&reference)
            .map(|(p, r): (&Vec3, &Vec3)| (p - r).norm_squared())
            .sum();
        println!(
            "{:<12} rmse {:.6} m  clamped {}",
            mode.as_str(),
            (sq / reference.len() as f64).sqrt(),
            out.clamped
        );
    }
    Ok(())
}
