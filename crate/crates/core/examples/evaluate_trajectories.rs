//! Absolute position error between two TUM trajectory files.
//!
//! Usage: `cargo run --example evaluate_trajectories <estimate.tum> <reference.tum>`
//! Without arguments a perturbed copy of a synthetic path is scored.

use drslam::eval::{ape_errors, ape_rmse, read_tum, Trajectory};
use drslam::se3::Pose;
use nalgebra::{UnitQuaternion, Vector3};

fn synthetic() -> (Trajectory, Trajectory) {
    let offset = Pose::new(UnitQuaternion::from_euler_angles(0.0, 0.0, 0.7), Vector3::new(3.0, -1.0, 0.5));
    let (mut est, mut reference) = (Trajectory::new(), Trajectory::new());
    for i in 0..100 {
        let s = i as f64 * 0.1;
        let g = Pose::from_translation(Vector3::new(s.cos() * 3.0, s.sin() * 2.0, 0.0));
        let wobble = Vector3::new(0.0, 0.0, 0.05 * (3.0 * s).sin());
        let e = offset.compose(&Pose::new(*g.rotation(), g.translation() + wobble));
        reference.push(s, g);
        est.push(s, e);
    }
    (est, reference)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (est, reference) = match args.as_slice() {
        [e, r] => (read_tum(e.as_ref())?, read_tum(r.as_ref())?),
        _ => synthetic(),
    };
    let errs = ape_errors(&est, &reference)?;
    let worst = errs.iter().map(|e| e.error).fold(0.0, f64::max);
    println!("{} pairs, rmse {:.4} m, max {:.4} m", errs.len(), ape_rmse(&est, &reference)?, worst);
    Ok(())
}
