//! LiDAR-inertial odometry: continuous-time motion correction, scan-to-map
//! GICP and a hierarchical geometric observer, plus a synthetic world to
//! test it against.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod deskew;
pub mod error;
pub mod geometry;
pub mod gicp;
pub mod kv;
pub mod map;
pub mod metrics;
pub mod observer;
pub mod pipeline;
pub mod preprocess;
pub mod propagation;
pub mod scenario;
pub mod search;
pub mod simulator;
pub mod types;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use geometry::{Pose, Quaternion, Vec3};
pub use types::{ImuSample, RobotState, TimedPoint, TimedPointCloud};
