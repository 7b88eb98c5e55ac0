mod common;

use common::linearity::hessian_linearity_error;
use common::problems::random_problem;
use common::rng;
use drslam::factors::DrFactor;
use drslam::optimizer::{
    build_normal_equations, check_gauge, dense_solve, min_pose_eigenvalue, optimize, schur_solve,
    solve_motion_only, Problem, SolverConfig, Termination,
};
use drslam::error::SolverError;
use drslam::quality::{scale_information, NominalDrInformation};
use drslam::se3::Pose;
use nalgebra::{DMatrix, Vector3};

#[test]
fn schur_step_equals_dense_step() {
    for seed in 0..20 {
        let p = random_problem(seed, 10, 50);
        let ne = build_normal_equations(&p);
        let s = schur_solve(&ne).unwrap().to_vector();
        let d = dense_solve(&ne).unwrap().to_vector();
        let err = (&s - &d).abs().max() / d.abs().max();
        assert!(err < 1e-8, "seed {seed}: relative difference {err:e}");
    }
}

#[test]
fn normal_equations_match_dense_jacobian_products() {
    // H is symmetric and b lies in the range of H.
    for seed in 0..5 {
        let ne = build_normal_equations(&random_problem(seed, 6, 30));
        let (h, _) = ne.to_dense();
        assert!((&h - h.transpose()).abs().max() <= 1e-9 * h.abs().max());
    }
}

#[test]
fn levenberg_marquardt_reduces_cost() {
    for seed in 0..5 {
        let mut p = random_problem(100 + seed, 8, 40);
        let before = p.cost();
        let report = optimize(&mut p, &SolverConfig::default()).unwrap();
        assert!(report.final_cost < before, "seed {seed}");
        assert!((report.final_cost - p.cost()).abs() <= 1e-9 * p.cost().max(1.0));
        assert!(report.min_pose_eigenvalue > 0.0);
    }
}

#[test]
fn hessian_is_affine_in_dr_weight() {
    for seed in 0..5 {
        let e = hessian_linearity_error(seed);
        assert!(e < 1e-10, "seed {seed}: {e:e}");
    }
}

#[test]
fn dr_alone_conditions_the_motion_only_solve() {
    let nominal = NominalDrInformation::from_degrees(0.004, 0.1);
    let mut r = rng(5);
    for _ in 0..10 {
        let prev = common::random_pose(&mut r, 3.0, 5.0);
        let delta = common::random_pose(&mut r, 0.05, 0.2);
        let mut p = Problem::new();
        let a = p.add_pose(0, prev, true);
        let b = p.add_pose(1, prev, false);
        p.add_dr(DrFactor::new(a, b, delta, scale_information(1000.0, &nominal)).unwrap())
            .unwrap();
        let report = solve_motion_only(&mut p, &SolverConfig::motion_only()).unwrap();
        assert!(report.min_pose_eigenvalue >= 0.99 * 1000.0 * nominal.min_diagonal());
        let expected = prev.compose(&delta);
        let got = p.poses[b].pose;
        assert!((got.translation() - expected.translation()).norm() < 1e-9);
        assert!(got.rotation().angle_to(expected.rotation()) < 1e-9);
    }
}

#[test]
fn min_eigenvalue_of_scaled_identity() {
    let h = DMatrix::<f64>::identity(6, 6) * 7.0;
    assert!((min_pose_eigenvalue(&h) - 7.0).abs() < 1e-12);
}

#[test]
fn unanchored_pose_is_a_gauge_error() {
    let mut p = Problem::new();
    p.add_pose(0, Pose::identity(), false);
    p.add_pose(1, Pose::from_translation(Vector3::x()), false);
    p.add_dr(DrFactor::new(0, 1, Pose::identity(), nalgebra::Matrix6::identity()).unwrap())
        .unwrap();
    assert!(matches!(check_gauge(&p), Err(SolverError::GaugeUnderconstrained { .. })));
}

#[test]
fn lone_pose_has_no_constraints() {
    let mut p = Problem::new();
    p.add_pose(0, Pose::identity(), false);
    assert_eq!(
        solve_motion_only(&mut p, &SolverConfig::motion_only()).unwrap_err(),
        SolverError::NoConstraints
    );
}

#[test]
fn fully_fixed_problem_terminates_immediately() {
    let mut p = random_problem(9, 3, 10);
    for v in &mut p.poses {
        v.fixed = true;
    }
    for l in &mut p.landmarks {
        l.fixed = true;
    }
    let r = optimize(&mut p, &SolverConfig::default()).unwrap();
    assert_eq!(r.termination, Termination::NoFreeVariables);
    assert_eq!(r.iterations, 0);
}
