mod common;

use common::jacobians;
use drslam::factors::{
    dr_residual, huber_cost, huber_weight, whiten, DepthFactor, DrFactor, ReprojectionFactor,
};
use drslam::quality::{NominalDrInformation, WeightBounds};
use drslam::se3::{Pose, Twist};
use nalgebra::{DMatrix, DVector, Matrix6, Vector2, Vector3, Vector6};
use proptest::prelude::*;

const FD_TOLERANCE: f64 = 1e-5;

#[test]
fn reprojection_jacobians_match_finite_differences() {
    let e = jacobians::reprojection(100, 1);
    assert!(e < FD_TOLERANCE, "worst relative error {e:e}");
}

#[test]
fn dr_jacobians_match_finite_differences() {
    let e = jacobians::dr(100, 2);
    assert!(e < FD_TOLERANCE, "worst relative error {e:e}");
}

#[test]
fn depth_jacobians_match_finite_differences() {
    let e = jacobians::depth(100, 3);
    assert!(e < FD_TOLERANCE, "worst relative error {e:e}");
}

#[test]
fn depth_factor_rejects_bad_input() {
    assert!(DepthFactor::new(0, 0, 0.0, 0.01).is_err());
    assert!(DepthFactor::new(0, 0, 1.0, 0.0).is_err());
    let f = DepthFactor::quadratic(0, 0, 2.0, 0.005).unwrap();
    assert!((f.std - 0.02).abs() < 1e-15);
}

#[test]
fn reprojection_rejects_pixels_outside_image() {
    let k = drslam::camera::CameraIntrinsics::default();
    assert!(ReprojectionFactor::new(0, 0, Vector2::new(-1.0, 10.0), 1.0, k).is_err());
    assert!(ReprojectionFactor::new(0, 0, Vector2::new(10.0, 10.0), 0.0, k).is_err());
}

#[test]
fn weighted_dr_factor_scales_nominal_information() {
    let nominal = NominalDrInformation::from_degrees(0.004, 0.1);
    let bounds = WeightBounds::default();
    let f = DrFactor::weighted(0, 1, Pose::identity(), 10.0, &nominal, &bounds).unwrap();
    let d = f.information.diagonal();
    assert!((d[0] - 10.0 / 0.004f64.powi(2)).abs() < 1e-6);
    assert!((d[5] - 10.0 / 0.1f64.to_radians().powi(2)).abs() < 1e-3);
    assert!(DrFactor::weighted(0, 1, Pose::identity(), 2000.0, &nominal, &bounds).is_err());
    let mut bad = Matrix6::identity();
    bad[(0, 1)] = 0.5;
    assert!(DrFactor::new(0, 1, Pose::identity(), bad).is_err());
}

#[test]
fn huber_is_quadratic_inside_and_linear_outside() {
    assert_eq!(huber_weight(1.0, 2.0), 1.0);
    assert_eq!(huber_weight(4.0, 2.0), 0.5);
    assert_eq!(huber_cost(1.5, 2.0), 2.25);
    assert_eq!(huber_cost(4.0, 2.0), 12.0);
}

fn spd(seed: [f64; 21], diag: [f64; 6]) -> DMatrix<f64> {
    let mut l = DMatrix::<f64>::zeros(6, 6);
    let mut k = 0;
    for i in 0..6 {
        for j in 0..i {
            l[(i, j)] = seed[k];
            k += 1;
        }
        l[(i, i)] = diag[i];
    }
    &l * l.transpose()
}

proptest! {
    #[test]
    fn whitened_norm_equals_mahalanobis(
        lower in prop::array::uniform21(-1.0f64..1.0),
        diag in prop::array::uniform6(0.5f64..3.0),
        r in prop::array::uniform6(-2.0f64..2.0),
    ) {
        let info = spd(lower, diag);
        let r = DVector::from_row_slice(&r);
        let w = whiten(&r, &[DMatrix::identity(6, 6)], &info).unwrap();
        let m = (r.transpose() * &info * &r)[(0, 0)];
        prop_assert!((w.residual.norm_squared() - m).abs() <= 1e-12 * m.max(1.0));
        let jtj = w.jacobians[0].transpose() * &w.jacobians[0];
        prop_assert!((jtj - &info).abs().max() <= 1e-12 * info.abs().max());
        let twist = Twist::from_vector(&Vector6::from_row_slice(r.as_slice()));
        let m6 = nalgebra::Matrix6::from_iterator(info.iter().copied());
        prop_assert!((twist.mahalanobis(&m6) - m).abs() <= 1e-12 * m.max(1.0));
    }

    #[test]
    fn dr_residual_vanishes_on_consistent_motion(
        t in prop::array::uniform3(-3.0f64..3.0),
        phi in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let a = Pose::exp(&Twist::new(Vector3::from(t), Vector3::from(phi)));
        let delta = Pose::exp(&Twist::new(Vector3::new(0.1, 0.0, 0.02), Vector3::new(0.0, 0.01, 0.0)));
        let b = a.compose(&delta);
        let f = DrFactor::new(0, 1, delta, Matrix6::identity()).unwrap();
        prop_assert!(dr_residual(&f, &a, &b).unwrap().residual.norm() < 1e-12);
    }
}
