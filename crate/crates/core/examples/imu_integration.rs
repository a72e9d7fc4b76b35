//! Dead reckoning over a single sweep interval at several IMU rates.
//!
//! cargo run --release --example imu_integration

use lio::propagation::integrate_imu;
use lio::simulator::{ground_truth_pose, sample_imu, SimNoiseSpec, TrajectorySpec};
use lio::RobotState;

fn main() -> lio::Result<()> {
    let spec = TrajectorySpec::aggressive_spin(8.0);
    let (t0, t1) = (4.0, 4.1);
    println!(
        "{:>8} {:>14} {:>14}",
        "rate Hz", "max pos err m", "max rot err deg"
    );
    for rate in [50.0, 100.0, 200.0, 400.0, 800.0] {
        let imu = sample_imu(&spec, rate, &SimNoiseSpec::noiseless())?;
        let a = imu
            .iter()
            .rposition(|s| s.stamp <= t0 + 1e-12)
            .expect("start sample");
        let c = imu
            .iter()
            .position(|s| s.stamp >= t1 - 1e-12)
            .expect("end sample");
        let k = spec.kinematics(imu[a].stamp);
        let start = RobotState {
            stamp: imu[a].stamp,
            velocity: k.velocity,
            ..RobotState::default()
        }
        .with_pose(&k.pose);
        let traj = integrate_imu(&start, &imu[a..=c])?;
        let (mut pos, mut rot) = (0.0f64, 0.0f64);
        for j in 0..=100 {
            let t = t0 + (t1 - t0) * j as f64 / 100.0;
            let est = traj.query_pose(t)?;
            let truth = ground_truth_pose(&spec, t);
            pos = pos.max(est.translation_distance(&truth));
            rot = rot.max(est.rotation_angle_to(&truth).to_degrees());
        }
        println!("{rate:>8} {pos:>14.3e} {rot:>14.3e}");
    }
    Ok(())
}
