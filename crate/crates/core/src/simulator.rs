//! Synthetic world: analytic trajectories, IMU synthesis and a spinning
//! LiDAR ray caster.
//!
//! Motion is written as a shape function of a warped clock. The warp holds
//! still for a static preamble, then eases in over a ramp with a quintic
//! smoothstep velocity profile, so the pose is twice differentiable in time.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{gravity, Pose, Quaternion, Vec3};
use crate::types::{ImuSample, TimedPoint, TimedPointCloud};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrajectoryKind {
    Static,
    ConstantVelocity {
        velocity: Vec3,
    },
    ConstantAccel {
        accel: Vec3,
    },
    /// Per-axis `A sin(2 pi f tau)` on position and on (roll, pitch, yaw).
    Sinusoid {
        amplitude: Vec3,
        frequency: Vec3,
        angle_amplitude: Vec3,
        angle_frequency: Vec3,
    },
    /// Constant yaw rate with a sinusoidal translation and a roll/pitch wobble.
    AggressiveSpin {
        spin_rate: f64,
        amplitude: Vec3,
        frequency: Vec3,
        wobble: f64,
        wobble_frequency: f64,
    },
}

impl TrajectoryKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryKind::Static => "static",
            TrajectoryKind::ConstantVelocity { .. } => "constant_velocity",
            TrajectoryKind::ConstantAccel { .. } => "constant_accel",
            TrajectoryKind::Sinusoid { .. } => "sinusoid",
            TrajectoryKind::AggressiveSpin { .. } => "aggressive_spin",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// Pose at t = 0.
    pub origin: Pose,
    /// Seconds.
    pub duration: f64,
    /// Motionless lead-in, seconds.
    pub preamble: f64,
    /// Ease-in length after the preamble, seconds. Zero starts motion abruptly.
    pub ramp: f64,
}

impl TrajectorySpec {
    pub fn new(kind: TrajectoryKind, duration: f64) -> Self {
        Self {
            kind,
            origin: Pose::identity(),
            duration,
            preamble: 1.0,
            ramp: 1.0,
        }
    }

    /// Same motion with no preamble and no ramp.
    pub fn immediate(kind: TrajectoryKind, duration: f64) -> Self {
        Self {
            preamble: 0.0,
            ramp: 0.0,
            ..Self::new(kind, duration)
        }
    }

    /// The scenario used for high-rate deskew tests: 3.5 rad/s yaw.
    pub fn aggressive_spin(duration: f64) -> Self {
        Self::new(
            TrajectoryKind::AggressiveSpin {
                spin_rate: 3.5,
                amplitude: Vec3::new(0.5, 0.5, 0.1),
                frequency: Vec3::new(0.25, 0.2, 0.3),
                wobble: 0.1,
                wobble_frequency: 0.5,
            },
            duration,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::invalid("duration", "must be > 0"));
        }
        if !(self.preamble >= 0.0) || !(self.ramp >= 0.0) {
            return Err(Error::invalid("preamble/ramp", "must be >= 0"));
        }
        if !self.origin.is_finite() {
            return Err(Error::NonFinite("origin"));
        }
        Ok(())
    }
}

/// Everything the simulator knows about the body at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub pose: Pose,
    /// World frame.
    pub velocity: Vec3,
    /// World frame, excluding gravity.
    pub accel: Vec3,
    /// Body frame.
    pub omega: Vec3,
}

/// Value with first and second derivative.
#[derive(Clone, Copy, Default)]
struct Jet {
    v: Vec3,
    d: Vec3,
    dd: Vec3,
}

fn sine(amp: f64, freq: f64, tau: f64) -> (f64, f64, f64) {
    let w = TAU * freq;
    let (s, c) = (w * tau).sin_cos();
    (amp * s, amp * w * c, -amp * w * w * s)
}

fn sine_jet(amp: &Vec3, freq: &Vec3, tau: f64) -> Jet {
    let mut j = Jet::default();
    for i in 0..3 {
        let (v, d, dd) = sine(amp[i], freq[i], tau);
        j.v[i] = v;
        j.d[i] = d;
        j.dd[i] = dd;
    }
    j
}

impl TrajectorySpec {
    /// Warped clock and its first two derivatives.
    fn warp(&self, t: f64) -> (f64, f64, f64) {
        let s = t - self.preamble;
        if s <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if s >= self.ramp {
            return (0.5 * self.ramp + (s - self.ramp), 1.0, 0.0);
        }
        let r = self.ramp;
        let u = s / r;
        let (u2, u3) = (u * u, u * u * u);
        let tau = r * u2 * u2 * (u2 - 3.0 * u + 2.5);
        let rate = u3 * (6.0 * u2 - 15.0 * u + 10.0);
        let rate_dot = 30.0 * u2 * (u - 1.0) * (u - 1.0) / r;
        (tau, rate, rate_dot)
    }

    /// Local position and (roll, pitch, yaw) as functions of warped time.
    fn shape(&self, tau: f64) -> (Jet, Jet) {
        let zero = Jet::default();
        match self.kind {
            TrajectoryKind::Static => (zero, zero),
            TrajectoryKind::ConstantVelocity { velocity } => (
                Jet {
                    v: velocity * tau,
                    d: velocity,
                    dd: Vec3::zeros(),
                },
                zero,
            ),
            TrajectoryKind::ConstantAccel { accel } => (
                Jet {
                    v: accel * (0.5 * tau * tau),
                    d: accel * tau,
                    dd: accel,
                },
                zero,
            ),
            TrajectoryKind::Sinusoid {
                amplitude,
                frequency,
                angle_amplitude,
                angle_frequency,
            } => (
                sine_jet(&amplitude, &frequency, tau),
                sine_jet(&angle_amplitude, &angle_frequency, tau),
            ),
            TrajectoryKind::AggressiveSpin {
                spin_rate,
                amplitude,
                frequency,
                wobble,
                wobble_frequency,
            } => {
                let pos = sine_jet(&amplitude, &frequency, tau);
                let (r, dr, ddr) = sine(wobble, wobble_frequency, tau);
                let (p, dp, ddp) = sine(wobble, 1.3 * wobble_frequency, tau);
                let ang = Jet {
                    v: Vec3::new(r, p, spin_rate * tau),
                    d: Vec3::new(dr, dp, spin_rate),
                    dd: Vec3::new(ddr, ddp, 0.0),
                };
                (pos, ang)
            }
        }
    }

    pub fn kinematics(&self, t: f64) -> Kinematics {
        let (tau, rate, rate_dot) = self.warp(t);
        let (pos, ang) = self.shape(tau);
        let vel = pos.d * rate;
        let acc = pos.dd * (rate * rate) + pos.d * rate_dot;
        let euler = ang.v;
        let euler_rate = ang.d * rate;

        let (sr, cr) = euler.x.sin_cos();
        let (sp, cp) = euler.y.sin_cos();
        let omega = Vec3::new(
            euler_rate.x - euler_rate.z * sp,
            euler_rate.y * cr + euler_rate.z * sr * cp,
            -euler_rate.y * sr + euler_rate.z * cr * cp,
        );

        let o = &self.origin;
        let local = Quaternion::from_euler(euler.x, euler.y, euler.z);
        Kinematics {
            pose: Pose::new(
                o.position + o.orientation.rotate(&pos.v),
                (o.orientation * local).normalized(),
            ),
            velocity: o.orientation.rotate(&vel),
            accel: o.orientation.rotate(&acc),
            omega,
        }
    }
}

pub fn ground_truth_pose(spec: &TrajectorySpec, t: f64) -> Pose {
    spec.kinematics(t).pose
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimNoiseSpec {
    pub accel_noise_std: f64,
    pub gyro_noise_std: f64,
    pub accel_bias: Vec3,
    pub gyro_bias: Vec3,
    pub seed: u64,
}

impl Default for SimNoiseSpec {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl SimNoiseSpec {
    pub fn noiseless() -> Self {
        Self {
            accel_noise_std: 0.0,
            gyro_noise_std: 0.0,
            accel_bias: Vec3::zeros(),
            gyro_bias: Vec3::zeros(),
            seed: 0,
        }
    }

    pub fn realistic(seed: u64) -> Self {
        Self {
            accel_noise_std: 0.02,
            gyro_noise_std: 0.002,
            seed,
            ..Self::noiseless()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accel_noise_std >= 0.0) || !(self.gyro_noise_std >= 0.0) {
            return Err(Error::invalid("noise std", "must be >= 0"));
        }
        Ok(())
    }
}

struct NoiseSource {
    rng: ChaCha8Rng,
    spec: SimNoiseSpec,
}

impl NoiseSource {
    fn new(spec: &SimNoiseSpec) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec: *spec,
        }
    }

    fn vec(&mut self, std: f64) -> Vec3 {
        let mut draw = || -> f64 { StandardNormal.sample(&mut self.rng) };
        Vec3::new(draw(), draw(), draw()) * std
    }

    fn corrupt(&mut self, accel: Vec3, gyro: Vec3) -> (Vec3, Vec3) {
        let na = self.vec(self.spec.accel_noise_std);
        let ng = self.vec(self.spec.gyro_noise_std);
        (
            accel + self.spec.accel_bias + na,
            gyro + self.spec.gyro_bias + ng,
        )
    }
}

fn tick_count(spec: &TrajectorySpec, rate: f64) -> Result<usize> {
    if !(rate > 0.0) {
        return Err(Error::invalid("imu rate", "must be > 0"));
    }
    spec.validate()?;
    Ok((spec.duration * rate + 1e-9).floor() as usize + 1)
}

/// IMU at the body origin, ticks at `k / rate` over the whole duration.
pub fn sample_imu(
    spec: &TrajectorySpec,
    rate: f64,
    noise: &SimNoiseSpec,
) -> Result<Vec<ImuSample>> {
    noise.validate()?;
    let n = tick_count(spec, rate)?;
    let mut src = NoiseSource::new(noise);
    Ok((0..n)
        .map(|k| {
            let t = k as f64 / rate;
            let kin = spec.kinematics(t);
            let specific = kin
                .pose
                .orientation
                .conjugate()
                .rotate(&(kin.accel - gravity()));
            let (a, g) = src.corrupt(specific, kin.omega);
            ImuSample::new(t, a, g)
        })
        .collect())
}

/// IMU mounted at `imu_to_robot`, readings in the IMU's own axes.
///
/// The acceleration of the offset point comes from central differences of
/// its world position, independent of any lever-arm formula.
pub fn sample_imu_mounted(
    spec: &TrajectorySpec,
    rate: f64,
    noise: &SimNoiseSpec,
    imu_to_robot: &Pose,
) -> Result<Vec<ImuSample>> {
    noise.validate()?;
    let n = tick_count(spec, rate)?;
    let mut src = NoiseSource::new(noise);
    let h = 1e-4;
    let point = |t: f64| ground_truth_pose(spec, t).transform_point(&imu_to_robot.position);
    let mount = imu_to_robot.orientation.conjugate();
    Ok((0..n)
        .map(|k| {
            let t = k as f64 / rate;
            let kin = spec.kinematics(t);
            let accel = (point(t + h) - point(t) * 2.0 + point(t - h)) / (h * h);
            let body = kin
                .pose
                .orientation
                .conjugate()
                .rotate(&(accel - gravity()));
            let (a, g) = src.corrupt(mount.rotate(&body), mount.rotate(&kin.omega));
            ImuSample::new(t, a, g)
        })
        .collect())
}

/// Axis-aligned box. One zero extent makes it a rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl AxisBox {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// Distance along a unit ray to the first surface hit. From inside the
    /// box the far wall is hit.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for i in 0..3 {
            if dir[i].abs() < 1e-15 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let a = (self.min[i] - origin[i]) / dir[i];
            let b = (self.max[i] - origin[i]) / dir[i];
            t_near = t_near.max(a.min(b));
            t_far = t_far.min(a.max(b));
        }
        if t_far < t_near || t_far <= 1e-9 {
            return None;
        }
        Some(if t_near > 1e-9 { t_near } else { t_far })
    }

    /// Distance from `p` to the nearest face of the box.
    pub fn surface_distance(&self, p: &Vec3) -> f64 {
        let mut outside = Vec3::zeros();
        let mut inside = f64::INFINITY;
        for i in 0..3 {
            outside[i] = (self.min[i] - p[i]).max(p[i] - self.max[i]).max(0.0);
            inside = inside
                .min((p[i] - self.min[i]).abs())
                .min((self.max[i] - p[i]).abs());
        }
        if outside.norm() > 0.0 {
            outside.norm()
        } else {
            inside
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SceneSpec {
    pub boxes: Vec<AxisBox>,
}

impl SceneSpec {
    /// Closed room of the given side length and height, floor at `floor_z`,
    /// with a few pillars so that no direction is featureless.
    pub fn box_room(side: f64, height: f64, floor_z: f64) -> Self {
        let h = side / 2.0;
        let top = floor_z + height;
        let pillar = |x: f64, y: f64, w: f64| {
            AxisBox::new(
                Vec3::new(x - w, y - w, floor_z),
                Vec3::new(x + w, y + w, top),
            )
        };
        Self {
            boxes: vec![
                AxisBox::new(Vec3::new(-h, -h, floor_z), Vec3::new(h, h, top)),
                pillar(0.45 * h, 0.35 * h, 0.4),
                pillar(-0.5 * h, 0.55 * h, 0.3),
                pillar(-0.3 * h, -0.6 * h, 0.5),
                AxisBox::new(
                    Vec3::new(0.6 * h, -0.7 * h, floor_z),
                    Vec3::new(0.8 * h, -0.4 * h, floor_z + 1.0),
                ),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for b in &self.boxes {
            let ext = b.max - b.min;
            if ext.iter().any(|e| !(*e >= 0.0)) || ext.iter().filter(|e| **e == 0.0).count() > 1 {
                return Err(Error::invalid("scene box", "degenerate extents"));
            }
        }
        Ok(())
    }

    pub fn cast(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        self.boxes
            .iter()
            .filter_map(|b| b.intersect(origin, dir))
            .min_by(f64::total_cmp)
    }

    pub fn surface_distance(&self, p: &Vec3) -> f64 {
        self.boxes
            .iter()
            .map(|b| b.surface_distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LidarSpec {
    pub channels: usize,
    pub horiz_res: usize,
    /// Sweeps per second.
    pub rate: f64,
    pub max_range: f64,
    pub min_range: f64,
    /// Full vertical field of view, radians, symmetric about the horizon.
    pub vertical_fov: f64,
}

impl Default for LidarSpec {
    fn default() -> Self {
        Self {
            channels: 32,
            horiz_res: 512,
            rate: 10.0,
            max_range: 100.0,
            min_range: 0.3,
            vertical_fov: 45f64.to_radians(),
        }
    }
}

impl LidarSpec {
    pub fn sweep_period(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.horiz_res == 0 {
            return Err(Error::invalid(
                "lidar",
                "channels and horiz_res must be > 0",
            ));
        }
        if !(self.rate > 0.0) || !(self.max_range > self.min_range) || !(self.min_range >= 0.0) {
            return Err(Error::invalid(
                "lidar",
                "rate and ranges must be positive and ordered",
            ));
        }
        Ok(())
    }

    fn elevation(&self, channel: usize) -> f64 {
        if self.channels == 1 {
            return 0.0;
        }
        -0.5 * self.vertical_fov + self.vertical_fov * channel as f64 / (self.channels - 1) as f64
    }
}

#[derive(Clone, Debug)]
pub struct Sweep {
    /// Hits in the sensor frame at each point's own time.
    pub distorted: TimedPointCloud,
    /// The same hits in the world frame.
    pub reference: TimedPointCloud,
    /// Sensor pose at each point's time.
    pub poses: Vec<Pose>,
}

/// Renders one sweep starting at `t0` with the sensor mounted at
/// `lidar_to_robot`.
pub fn render_sweep(
    spec: &TrajectorySpec,
    scene: &SceneSpec,
    lidar: &LidarSpec,
    lidar_to_robot: &Pose,
    t0: f64,
) -> Result<Sweep> {
    lidar.validate()?;
    let t_end = t0 + lidar.sweep_period();
    if t0 < 0.0 || t_end > spec.duration + 1e-9 {
        return Err(Error::OutOfRange {
            t: t_end,
            start: 0.0,
            end: spec.duration,
        });
    }
    let column_dt = lidar.sweep_period() / lidar.horiz_res as f64;
    let dirs: Vec<Vec3> = (0..lidar.channels)
        .map(|c| {
            let (se, ce) = lidar.elevation(c).sin_cos();
            Vec3::new(ce, 0.0, se)
        })
        .collect();

    let columns: Vec<Vec<(TimedPoint, TimedPoint, Pose)>> = (0..lidar.horiz_res)
        .into_par_iter()
        .map(|j| {
            let dt = j as f64 * column_dt;
            let sensor = ground_truth_pose(spec, t0 + dt).compose(lidar_to_robot);
            let (sa, ca) = (TAU * j as f64 / lidar.horiz_res as f64).sin_cos();
            dirs.iter()
                .filter_map(|d| {
                    let local = Vec3::new(d.x * ca, d.x * sa, d.z);
                    let world_dir = sensor.orientation.rotate(&local);
                    let range = scene.cast(&sensor.position, &world_dir)?;
                    if range < lidar.min_range || range > lidar.max_range {
                        return None;
                    }
                    let hit = sensor.position + world_dir * range;
                    Some((
                        TimedPoint::new(local * range, dt),
                        TimedPoint::new(hit, dt),
                        sensor,
                    ))
                })
                .collect()
        })
        .collect();

    let n = columns.iter().map(Vec::len).sum();
    let mut distorted = Vec::with_capacity(n);
    let mut reference = Vec::with_capacity(n);
    let mut poses = Vec::with_capacity(n);
    for (d, r, p) in columns.into_iter().flatten() {
        distorted.push(d);
        reference.push(r);
        poses.push(p);
    }
    Ok(Sweep {
        distorted: TimedPointCloud::new(t0, distorted),
        reference: TimedPointCloud::new(t0, reference),
        poses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sinusoid() -> TrajectorySpec {
        TrajectorySpec::immediate(
            TrajectoryKind::Sinusoid {
                amplitude: Vec3::new(2.0, 1.0, 0.3),
                frequency: Vec3::new(0.1, 0.2, 0.15),
                angle_amplitude: Vec3::new(0.05, 0.08, 0.6),
                angle_frequency: Vec3::new(0.2, 0.15, 0.1),
            },
            10.0,
        )
    }

    #[test]
    fn static_imu_reads_gravity_only() {
        let mut spec = TrajectorySpec::new(TrajectoryKind::Static, 2.0);
        spec.origin = Pose::new(
            Vec3::new(1.0, 2.0, 3.0),
            Quaternion::from_euler(0.1, 0.2, 0.3),
        );
        let s = sample_imu(&spec, 100.0, &SimNoiseSpec::noiseless()).unwrap();
        assert_eq!(s.len(), 201);
        let expected = spec.origin.orientation.conjugate().rotate(&-gravity());
        for x in &s {
            assert_relative_eq!(x.accel, expected, epsilon = 1e-12);
            assert_eq!(x.gyro, Vec3::zeros());
        }
    }

    #[test]
    fn constant_velocity_reads_gravity_only() {
        let spec = TrajectorySpec::immediate(
            TrajectoryKind::ConstantVelocity {
                velocity: Vec3::new(1.0, -0.5, 0.0),
            },
            1.0,
        );
        for x in sample_imu(&spec, 50.0, &SimNoiseSpec::noiseless()).unwrap() {
            assert_eq!(x.accel, -gravity());
        }
    }

    #[test]
    fn sinusoid_second_derivative() {
        let spec = TrajectorySpec::immediate(
            TrajectoryKind::Sinusoid {
                amplitude: Vec3::new(1.5, 0.0, 0.0),
                frequency: Vec3::new(0.3, 0.1, 0.1),
                angle_amplitude: Vec3::zeros(),
                angle_frequency: Vec3::zeros(),
            },
            5.0,
        );
        let s = sample_imu(&spec, 100.0, &SimNoiseSpec::noiseless()).unwrap();
        assert!(s[0].accel.x.abs() < 1e-9);
        // t = 1.0 against the closed form
        let w = TAU * 0.3;
        assert!((s[100].accel.x - (-1.5 * w * w * (w * 1.0).sin())).abs() < 1e-9);
    }

    #[test]
    fn sinusoid_position_closed_form() {
        let spec = sinusoid();
        for t in [0.0, 0.37, 2.5, 9.99] {
            let p = ground_truth_pose(&spec, t).position;
            assert!((p.x - 2.0 * (TAU * 0.1 * t).sin()).abs() < 1e-12);
            assert!((p.y - (TAU * 0.2 * t).sin()).abs() < 1e-12);
        }
        assert_eq!(ground_truth_pose(&spec, 0.0), Pose::identity());
    }

    #[test]
    fn preamble_is_motionless_and_warp_is_smooth() {
        let spec = TrajectorySpec::aggressive_spin(5.0);
        assert_eq!(ground_truth_pose(&spec, 0.5), spec.origin);
        let k = spec.kinematics(0.99);
        assert_eq!(k.velocity, Vec3::zeros());
        // velocity and accel continuous across the ramp end
        let (a, b) = (spec.kinematics(2.0 - 1e-7), spec.kinematics(2.0 + 1e-7));
        assert!((a.velocity - b.velocity).norm() < 1e-5);
        assert!((a.accel - b.accel).norm() < 1e-5);
        assert!((a.omega - b.omega).norm() < 1e-5);
        // after the ramp the yaw rate is the spin rate (with small wobble)
        assert!((b.omega.z - 3.5).abs() < 0.4);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let spec = TrajectorySpec::aggressive_spin(6.0);
        let h = 1e-5;
        for t in [1.3, 1.9, 2.7, 4.4] {
            let k = spec.kinematics(t);
            let p = |t| ground_truth_pose(&spec, t).position;
            let v = (p(t + h) - p(t - h)) / (2.0 * h);
            assert!((v - k.velocity).norm() < 1e-6);
            let vel = |t| spec.kinematics(t).velocity;
            let a = (vel(t + h) - vel(t - h)) / (2.0 * h);
            assert!((a - k.accel).norm() < 1e-5);
            // body rate from the orientation derivative
            let q0 = ground_truth_pose(&spec, t - h).orientation;
            let q1 = ground_truth_pose(&spec, t + h).orientation;
            let w = (q0.conjugate() * q1).to_rotation_vector() / (2.0 * h);
            assert!((w - k.omega).norm() < 1e-5, "{w} vs {}", k.omega);
        }
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let spec = sinusoid();
        let a = sample_imu(&spec, 100.0, &SimNoiseSpec::realistic(7)).unwrap();
        let b = sample_imu(&spec, 100.0, &SimNoiseSpec::realistic(7)).unwrap();
        let c = sample_imu(&spec, 100.0, &SimNoiseSpec::realistic(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mounted_imu_without_offset_matches_body_imu() {
        let spec = sinusoid();
        let a = sample_imu(&spec, 20.0, &SimNoiseSpec::noiseless()).unwrap();
        let b =
            sample_imu_mounted(&spec, 20.0, &SimNoiseSpec::noiseless(), &Pose::identity()).unwrap();
        for (x, y) in a.iter().zip(&b).skip(1) {
            assert!((x.accel - y.accel).norm() < 1e-5);
            assert_eq!(x.gyro, y.gyro);
        }
    }

    #[test]
    fn box_ray_hits() {
        let b = AxisBox::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0));
        assert_relative_eq!(b.intersect(&Vec3::zeros(), &Vec3::x()).unwrap(), 1.0);
        assert_relative_eq!(
            b.intersect(&Vec3::new(-3.0, 0.0, 0.0), &Vec3::x()).unwrap(),
            2.0
        );
        assert!(b
            .intersect(&Vec3::new(-3.0, 0.0, 0.0), &-Vec3::x())
            .is_none());
        assert!(b
            .intersect(&Vec3::new(-3.0, 5.0, 0.0), &Vec3::x())
            .is_none());
        let rect = AxisBox::new(Vec3::new(2.0, -1.0, -1.0), Vec3::new(2.0, 1.0, 1.0));
        assert_relative_eq!(rect.intersect(&Vec3::zeros(), &Vec3::x()).unwrap(), 2.0);
    }

    #[test]
    fn static_sweep_distorted_equals_reference_in_sensor_frame() {
        let mut spec = TrajectorySpec::new(TrajectoryKind::Static, 1.0);
        spec.origin = Pose::new(
            Vec3::new(0.5, -1.0, 0.2),
            Quaternion::from_euler(0.0, 0.0, 0.4),
        );
        let scene = SceneSpec::box_room(20.0, 5.0, -1.5);
        let lidar = LidarSpec::default();
        let mount = Pose::from_translation(Vec3::new(0.0, 0.0, 0.3));
        let sweep = render_sweep(&spec, &scene, &lidar, &mount, 0.0).unwrap();
        assert!(sweep.distorted.len() <= lidar.channels * lidar.horiz_res);
        assert!(sweep.distorted.len() > 16000);
        let sensor = spec.origin.compose(&mount);
        let back = sweep.reference.transformed(&sensor.inverse());
        for (a, b) in sweep.distorted.points().iter().zip(back.points()) {
            assert!((a.xyz - b.xyz).norm() < 1e-9);
        }
        for p in sweep.reference.points() {
            assert!(scene.surface_distance(&p.xyz) < 1e-9);
        }
    }

    fn plane_residual(points: &[Vec3]) -> f64 {
        // least-squares plane through the centroid, max distance
        let n = points.len() as f64;
        let c = points.iter().sum::<Vec3>() / n;
        let mut cov = nalgebra::Matrix3::zeros();
        for p in points {
            let d = p - c;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let i = eig.eigenvalues.imin();
        let normal = eig.eigenvectors.column(i).into_owned();
        points
            .iter()
            .map(|p| (p - c).dot(&normal).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn spinning_wall_is_curved_only_when_distorted() {
        let spec = TrajectorySpec::immediate(
            TrajectoryKind::ConstantVelocity {
                velocity: Vec3::zeros(),
            },
            1.0,
        );
        let spin = TrajectorySpec {
            kind: TrajectoryKind::AggressiveSpin {
                spin_rate: 3.5,
                amplitude: Vec3::zeros(),
                frequency: Vec3::zeros(),
                wobble: 0.0,
                wobble_frequency: 0.0,
            },
            ..spec
        };
        let scene = SceneSpec {
            boxes: vec![AxisBox::new(
                Vec3::new(5.0, -20.0, -20.0),
                Vec3::new(5.0, 20.0, 20.0),
            )],
        };
        let sweep =
            render_sweep(&spin, &scene, &LidarSpec::default(), &Pose::identity(), 0.0).unwrap();
        assert!(plane_residual(&sweep.reference.positions()) < 1e-6);
        assert!(plane_residual(&sweep.distorted.positions()) > 1e-2);
    }

    #[test]
    fn sweep_outside_trajectory_rejected() {
        let spec = TrajectorySpec::new(TrajectoryKind::Static, 1.0);
        let r = render_sweep(
            &spec,
            &SceneSpec::box_room(10.0, 3.0, -1.0),
            &LidarSpec::default(),
            &Pose::identity(),
            0.95,
        );
        assert!(r.is_err());
    }

    proptest! {
        #[test]
        fn orientation_stays_unit(t in 0.0f64..6.0) {
            let q = ground_truth_pose(&TrajectorySpec::aggressive_spin(6.0), t).orientation;
            prop_assert!((q.norm() - 1.0).abs() < 1e-12);
        }
    }
}
