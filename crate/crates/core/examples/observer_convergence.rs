//! Geometric observer recovering from a bad initial state.
//!
//! The observer starts with a 1 m/s velocity error, a 10 degree tilt and
//! zero bias estimates while the IMU carries constant biases, and receives
//! a reference pose every 100 ms.
//!
//! cargo run --release --example observer_convergence -- [g1 g2 g3 g4 g5]

use lio::observer::{self, ObserverGains};
use lio::simulator::{sample_imu, SimNoiseSpec, TrajectoryKind, TrajectorySpec};
use lio::{Quaternion, RobotState, Vec3};

fn main() -> lio::Result<()> {
    let g: Vec<f64> = std::env::args()
        .skip(1)
        .map(|s| s.parse().expect("gain"))
        .collect();
    let gains = if g.len() == 5 {
        ObserverGains {
            gamma1: g[0],
            gamma2: g[1],
            gamma3: g[2],
            gamma4: g[3],
            gamma5: g[4],
        }
    } else {
        ObserverGains::default()
    };
    gains.validate()?;

    let spec = TrajectorySpec::new(
        TrajectoryKind::Sinusoid {
            amplitude: Vec3::new(2.0, 1.5, 0.3),
            frequency: Vec3::new(0.1, 0.15, 0.2),
            angle_amplitude: Vec3::new(0.1, 0.1, 1.0),
            angle_frequency: Vec3::new(0.2, 0.15, 0.1),
        },
        15.0,
    );
    let accel_bias = Vec3::new(0.2, 0.0, 0.0);
    let gyro_bias = Vec3::new(0.0, 0.0, 0.02);
    let imu = sample_imu(
        &spec,
        100.0,
        &SimNoiseSpec {
            accel_bias,
            gyro_bias,
            ..SimNoiseSpec::noiseless()
        },
    )?;
    let clean = sample_imu(&spec, 100.0, &SimNoiseSpec::noiseless())?;

    let first = 200;
    let k = spec.kinematics(imu[first].stamp);
    let start = RobotState {
        stamp: imu[first].stamp,
        velocity: k.velocity,
        ..RobotState::default()
    }
    .with_pose(&k.pose);
    let mut reference = start;
    let mut state = RobotState {
        velocity: start.velocity + Vec3::new(1.0, 0.0, 0.0),
        orientation: start.orientation
            * Quaternion::from_axis_angle(
                &Vec3::new(1.0, 1.0, 0.0).normalize(),
                10f64.to_radians(),
            ),
        ..start
    };

    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>10}",
        "t", "vel", "accel b", "gyro b", "att deg"
    );
    for i in first + 1..imu.len() {
        let dt = imu[i].stamp - imu[i - 1].stamp;
        reference = observer::propagate(&reference, &clean[i - 1], dt)?;
        state = observer::propagate(&state, &imu[i - 1], dt)?;
        if (i - first) % 10 == 0 {
            state = observer::update(&state, &reference.pose(), 0.1, &gains)?;
        }
        if (i - first) % 100 == 0 {
            println!(
                "{:5.1} {:10.2e} {:10.2e} {:10.2e} {:10.2e}",
                (i - first) as f64 / 100.0,
                (state.velocity - reference.velocity).norm(),
                (state.accel_bias - accel_bias).norm(),
                (state.gyro_bias - gyro_bias).norm(),
                state
                    .orientation
                    .angle_to(&reference.orientation)
                    .to_degrees()
            );
        }
    }
    Ok(())
}
