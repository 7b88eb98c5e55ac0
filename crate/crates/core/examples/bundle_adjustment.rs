//! A two-camera bundle adjustment with a DR link between the cameras,
//! solved by Levenberg-Marquardt. The first step is also solved both with
//! the Schur complement and densely.

use drslam::camera::CameraIntrinsics;
use drslam::factors::{DrFactor, ReprojectionFactor};
use drslam::optimizer::{build_normal_equations, dense_solve, optimize, schur_solve, Problem, SolverConfig};
use drslam::quality::{scale_information, NominalDrInformation};
use drslam::se3::Pose;
use nalgebra::{Vector3, Vector6};

fn main() {
    let k = CameraIntrinsics::default();
    let truth = [Pose::identity(), Pose::from_translation(Vector3::new(0.5, 0.0, 0.0))];
    let mut problem = Problem::new();
    problem.add_pose(0, truth[0], true);
    problem.add_pose(1, truth[1].retract(&Vector6::new(0.05, -0.03, 0.02, 0.01, -0.01, 0.0)), false);

    let nominal = NominalDrInformation::default();
    let delta = truth[0].inverse().compose(&truth[1]);
    problem
        .add_dr(DrFactor::new(0, 1, delta, scale_information(1.0, &nominal)).unwrap())
        .unwrap();

    for i in 0..30 {
        let x = Vector3::new(-1.5 + 0.1 * i as f64, 0.6 * ((i % 5) as f64 - 2.0) / 2.0, 4.0 + 0.1 * (i % 7) as f64);
        let l = problem.add_landmark(i, x + Vector3::new(0.02, -0.02, 0.05), false);
        for (c, pose) in truth.iter().enumerate() {
            let uv = k.project(&pose.inverse().transform_point(&x)).unwrap();
            problem.add_reprojection(ReprojectionFactor::new(c, l, uv, 1.0, k).unwrap()).unwrap();
        }
    }

    let ne = build_normal_equations(&problem);
    let s = schur_solve(&ne).unwrap().to_vector();
    let d = dense_solve(&ne).unwrap().to_vector();
    println!("first step, Schur vs dense: {:.2e}", (&s - &d).abs().max());

    let report = optimize(&mut problem, &SolverConfig::default()).unwrap();
    println!(
        "cost {:.3e} -> {:.3e} in {} iterations ({:?})",
        report.initial_cost, report.final_cost, report.iterations, report.termination
    );
    let err = (problem.poses[1].pose.translation() - truth[1].translation()).norm();
    println!("second camera position error {err:.2e} m");
}
