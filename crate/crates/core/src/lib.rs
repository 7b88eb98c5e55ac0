//! Visual SLAM with quality-weighted dead-reckoning priors.
//!
//! Frame tracking, local bundle adjustment and global bundle adjustment all
//! carry a relative-pose prior from wheel odometry whose information is
//! scaled by how well the camera is currently tracking. When texture is rich
//! the prior is weak; when features vanish it takes over.
//!
//! The crate also ships a synthetic sequence simulator and the evaluation
//! harnesses (APE, weight sweeps, repeated loops) used to exercise it.

pub mod camera;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod factors;
pub mod optimizer;
pub mod quality;
pub mod se3;
pub mod sim;
pub mod slam;
