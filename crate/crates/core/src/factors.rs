//! Residuals and analytic Jacobians for the factors of the joint objective:
//! pixel reprojection of a landmark, measured landmark depth (RGB-D), and
//! the relative-pose prior from dead reckoning.
//!
//! Poses are camera-to-world transforms. A landmark `X` lands in the camera
//! at `T^-1 X`. Jacobians are with respect to `T * exp(delta)`.

use nalgebra::{
    Cholesky, DMatrix, DVector, Matrix2x3, Matrix2x6, Matrix6, RowVector3, RowVector6, SMatrix,
    SVector, Vector2, Vector3, Vector6,
};

use crate::camera::{CameraIntrinsics, Z_MIN};
use crate::error::{FactorError, GeometryError};
use crate::quality::{scale_information, NominalDrInformation, WeightBounds};
use crate::se3::{log_se3, right_jacobian_se3_inverse, skew, Pose, Twist};

/// Huber threshold in units of the pixel standard deviation
/// (95% quantile of chi-square with two degrees of freedom, square-rooted).
pub const HUBER_SIGMAS: f64 = 2.447;

/// Pixel observation of a landmark from a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprojectionFactor {
    pub pose: usize,
    pub landmark: usize,
    pub observed: Vector2<f64>,
    pub pixel_std: f64,
    pub huber_threshold: f64,
    pub camera: CameraIntrinsics,
}

impl ReprojectionFactor {
    /// Factor with the default Huber threshold of `2.447 * pixel_std`.
    pub fn new(
        pose: usize,
        landmark: usize,
        observed: Vector2<f64>,
        pixel_std: f64,
        camera: CameraIntrinsics,
    ) -> Result<Self, FactorError> {
        Self::with_threshold(
            pose,
            landmark,
            observed,
            pixel_std,
            HUBER_SIGMAS * pixel_std,
            camera,
        )
    }

    pub fn with_threshold(
        pose: usize,
        landmark: usize,
        observed: Vector2<f64>,
        pixel_std: f64,
        huber_threshold: f64,
        camera: CameraIntrinsics,
    ) -> Result<Self, FactorError> {
        if !(pixel_std > 0.0) {
            return Err(FactorError::InvalidObservation(
                "pixel std must be positive".into(),
            ));
        }
        if !(huber_threshold > 0.0) {
            return Err(FactorError::InvalidObservation(
                "Huber threshold must be positive".into(),
            ));
        }
        if !camera.in_image(&observed) {
            return Err(FactorError::InvalidObservation(format!(
                "pixel ({}, {}) outside the image",
                observed.x, observed.y
            )));
        }
        Ok(Self {
            pose,
            landmark,
            observed,
            pixel_std,
            huber_threshold,
            camera,
        })
    }

    pub fn information(&self) -> f64 {
        1.0 / (self.pixel_std * self.pixel_std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprojectionLinearization {
    pub residual: Vector2<f64>,
    pub j_pose: Matrix2x6<f64>,
    pub j_landmark: Matrix2x3<f64>,
}

/// `observed - project(T^-1 X)` with its Jacobians.
pub fn reprojection_residual(
    factor: &ReprojectionFactor,
    pose: &Pose,
    landmark: &Vector3<f64>,
) -> Result<ReprojectionLinearization, GeometryError> {
    let r_cw = pose.rotation_matrix().transpose();
    let p_c = r_cw * (landmark - pose.translation());
    let uv = factor.camera.project(&p_c)?;
    let jp = factor.camera.project_jacobian(&p_c);
    // d p_c / d(rho, phi) = [-I, [p_c]x] under T exp(delta)
    let mut j_pose = Matrix2x6::zeros();
    j_pose.fixed_view_mut::<2, 3>(0, 0).copy_from(&jp);
    j_pose
        .fixed_view_mut::<2, 3>(0, 3)
        .copy_from(&(-jp * skew(&p_c)));
    Ok(ReprojectionLinearization {
        residual: factor.observed - uv,
        j_pose,
        j_landmark: -jp * r_cw,
    })
}

/// Depth of a landmark measured along the optical axis of a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthFactor {
    pub pose: usize,
    pub landmark: usize,
    pub depth: f64,
    pub std: f64,
}

impl DepthFactor {
    pub fn new(pose: usize, landmark: usize, depth: f64, std: f64) -> Result<Self, FactorError> {
        if !(depth > Z_MIN) || !depth.is_finite() {
            return Err(FactorError::InvalidObservation(format!(
                "depth {depth} is not in front of the camera"
            )));
        }
        if !(std > 0.0) || !std.is_finite() {
            return Err(FactorError::InvalidObservation(
                "depth std must be positive".into(),
            ));
        }
        Ok(Self {
            pose,
            landmark,
            depth,
            std,
        })
    }

    /// Factor whose standard deviation grows quadratically with depth,
    /// `coefficient * depth^2`, as for structured-light sensors.
    pub fn quadratic(
        pose: usize,
        landmark: usize,
        depth: f64,
        coefficient: f64,
    ) -> Result<Self, FactorError> {
        Self::new(pose, landmark, depth, coefficient * depth * depth)
    }

    pub fn information(&self) -> f64 {
        1.0 / (self.std * self.std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthLinearization {
    pub residual: f64,
    pub j_pose: RowVector6<f64>,
    pub j_landmark: RowVector3<f64>,
}

/// `depth - z` where `z` is the landmark depth in the camera, with Jacobians.
pub fn depth_residual(
    factor: &DepthFactor,
    pose: &Pose,
    landmark: &Vector3<f64>,
) -> Result<DepthLinearization, GeometryError> {
    let r_cw = pose.rotation_matrix().transpose();
    let p_c = r_cw * (landmark - pose.translation());
    if p_c.z <= Z_MIN {
        return Err(GeometryError::BehindCamera { depth: p_c.z });
    }
    // z row of d p_c / d(rho, phi) = [-I, [p_c]x], negated
    let e3 = RowVector3::new(0.0, 0.0, 1.0);
    let mut j_pose = RowVector6::zeros();
    j_pose.fixed_view_mut::<1, 3>(0, 0).copy_from(&e3);
    j_pose
        .fixed_view_mut::<1, 3>(0, 3)
        .copy_from(&(-e3 * skew(&p_c)));
    Ok(DepthLinearization {
        residual: factor.depth - p_c.z,
        j_pose,
        j_landmark: -e3 * r_cw,
    })
}

/// Relative-pose prior between two poses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrFactor {
    pub from: usize,
    pub to: usize,
    pub delta: Pose,
    pub information: Matrix6<f64>,
}

impl DrFactor {
    pub fn new(
        from: usize,
        to: usize,
        delta: Pose,
        information: Matrix6<f64>,
    ) -> Result<Self, FactorError> {
        let asym = (information - information.transpose()).abs().max();
        if asym > 1e-9 * information.abs().max().max(1.0) {
            return Err(FactorError::NotPositiveDefinite);
        }
        if Cholesky::new(information).is_none() {
            return Err(FactorError::NotPositiveDefinite);
        }
        Ok(Self {
            from,
            to,
            delta,
            information,
        })
    }

    /// Factor whose information is `alpha` times the nominal DR information;
    /// `alpha` must lie within `bounds`.
    pub fn weighted(
        from: usize,
        to: usize,
        delta: Pose,
        alpha: f64,
        nominal: &NominalDrInformation,
        bounds: &WeightBounds,
    ) -> Result<Self, FactorError> {
        if !bounds.contains(alpha) {
            return Err(FactorError::WeightOutOfBounds {
                alpha,
                min: bounds.alpha_min,
                max: bounds.alpha_max,
            });
        }
        Self::new(from, to, delta, scale_information(alpha, nominal))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrLinearization {
    pub residual: Twist,
    pub j_from: Matrix6<f64>,
    pub j_to: Matrix6<f64>,
}

/// `log(delta^-1 * from^-1 * to)`, zero when the estimated relative motion
/// equals the DR increment.
pub fn dr_residual(
    factor: &DrFactor,
    pose_from: &Pose,
    pose_to: &Pose,
) -> Result<DrLinearization, GeometryError> {
    let relative = pose_from.inverse().compose(pose_to);
    let err = factor.delta.inverse().compose(&relative);
    let r = log_se3(&err)?;
    let jr_inv = right_jacobian_se3_inverse(&r);
    let j_to = jr_inv;
    let j_from = -jr_inv * relative.inverse().adjoint();
    Ok(DrLinearization {
        residual: r,
        j_from,
        j_to,
    })
}

/// IRLS weight of the Huber kernel: `1` inside the threshold, `k / |r|` outside.
pub fn huber_weight(residual_norm: f64, threshold: f64) -> f64 {
    debug_assert!(threshold > 0.0);
    if residual_norm <= threshold {
        1.0
    } else {
        threshold / residual_norm
    }
}

/// Huber cost of a residual with whitened norm `e` and whitened threshold `k`;
/// equals `e^2` inside the threshold.
pub fn huber_cost(e: f64, k: f64) -> f64 {
    if e <= k {
        e * e
    } else {
        2.0 * k * e - k * k
    }
}

/// Upper-triangular square root `U` of an information matrix, `U^T U = Λ`.
#[derive(Debug, Clone, Copy)]
pub struct SqrtInformation<const N: usize> {
    upper: SMatrix<f64, N, N>,
}

impl<const N: usize> SqrtInformation<N> {
    pub fn new(information: &SMatrix<f64, N, N>) -> Result<Self, FactorError> {
        let chol = Cholesky::new(*information).ok_or(FactorError::NotPositiveDefinite)?;
        Ok(Self {
            upper: chol.l().transpose(),
        })
    }

    pub fn residual(&self, r: &SVector<f64, N>) -> SVector<f64, N> {
        self.upper * r
    }

    pub fn jacobian<const C: usize>(&self, j: &SMatrix<f64, N, C>) -> SMatrix<f64, N, C> {
        self.upper * j
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Whitened {
    pub residual: DVector<f64>,
    pub jacobians: Vec<DMatrix<f64>>,
}

/// Left-multiplies a residual and its Jacobian blocks by the upper
/// Cholesky factor of `information`, so `|r_w|^2 = r^T Λ r`.
pub fn whiten(
    residual: &DVector<f64>,
    jacobians: &[DMatrix<f64>],
    information: &DMatrix<f64>,
) -> Result<Whitened, FactorError> {
    let n = residual.len();
    if information.nrows() != n || information.ncols() != n {
        return Err(FactorError::InvalidObservation(
            "information size does not match residual".into(),
        ));
    }
    let chol = Cholesky::new(information.clone()).ok_or(FactorError::NotPositiveDefinite)?;
    let u = chol.l().transpose();
    Ok(Whitened {
        residual: &u * residual,
        jacobians: jacobians.iter().map(|j| &u * j).collect(),
    })
}

impl Twist {
    pub fn mahalanobis(&self, information: &Matrix6<f64>) -> f64 {
        let v: Vector6<f64> = self.to_vector();
        (v.transpose() * information * v)[(0, 0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::default()
    }

    #[test]
    fn exact_observation_has_zero_residual() {
        let pose = Pose::new(
            UnitQuaternion::from_euler_angles(0.1, -0.2, 0.05),
            Vector3::new(0.2, -0.1, 0.3),
        );
        let x = pose.transform_point(&Vector3::new(0.1, 0.2, 3.0));
        let uv = cam()
            .project(&pose.inverse().transform_point(&x))
            .unwrap();
        let f = ReprojectionFactor::new(0, 0, uv, 1.0, cam()).unwrap();
        let lin = reprojection_residual(&f, &pose, &x).unwrap();
        assert!(lin.residual.norm() < 1e-9);
    }

    #[test]
    fn landmark_behind_camera_is_inactive() {
        let f = ReprojectionFactor::new(0, 0, Vector2::new(320.0, 240.0), 1.0, cam()).unwrap();
        let r = reprojection_residual(&f, &Pose::identity(), &Vector3::new(0.0, 0.0, -1.0));
        assert!(matches!(r, Err(GeometryError::BehindCamera { .. })));
    }

    #[test]
    fn observation_outside_image_is_rejected() {
        assert!(ReprojectionFactor::new(0, 0, Vector2::new(700.0, 10.0), 1.0, cam()).is_err());
        assert!(ReprojectionFactor::new(0, 0, Vector2::new(10.0, 10.0), 0.0, cam()).is_err());
    }

    #[test]
    fn consistent_motion_has_zero_dr_residual() {
        let a = Pose::new(
            UnitQuaternion::from_euler_angles(0.3, 0.1, -0.4),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let d = Pose::new(
            UnitQuaternion::from_euler_angles(0.0, 0.05, 0.02),
            Vector3::new(0.1, 0.0, 0.02),
        );
        let f = DrFactor::new(0, 1, d, Matrix6::identity()).unwrap();
        let lin = dr_residual(&f, &a, &a.compose(&d)).unwrap();
        assert!(lin.residual.norm() < 1e-12);
        let f0 = DrFactor::new(0, 1, Pose::identity(), Matrix6::identity()).unwrap();
        assert_eq!(dr_residual(&f0, &a, &a).unwrap().residual.norm(), 0.0);
    }

    #[test]
    fn huber_examples() {
        assert_eq!(huber_weight(0.0, 2.0), 1.0);
        assert_eq!(huber_weight(2.0, 2.0), 1.0);
        assert_eq!(huber_weight(4.0, 2.0), 0.5);
    }

    #[test]
    fn whiten_identity_and_diagonal() {
        let r = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let j = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let w = whiten(&r, &[j.clone()], &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(w.residual, r);
        assert_eq!(w.jacobians[0], j);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0, 16.0]));
        let w = whiten(&r, &[j.clone()], &d).unwrap();
        assert!((w.residual - DVector::from_vec(vec![2.0, -6.0, 12.0])).norm() < 1e-12);
        assert!((w.jacobians[0].row(1) - j.row(1) * 3.0).norm() < 1e-12);
    }

    #[test]
    fn whiten_rejects_indefinite() {
        let r = DVector::from_vec(vec![1.0, 1.0]);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(whiten(&r, &[], &bad), Err(FactorError::NotPositiveDefinite));
    }

    #[test]
    fn dr_factor_requires_spd_and_bounds() {
        let bad = -Matrix6::<f64>::identity();
        assert!(DrFactor::new(0, 1, Pose::identity(), bad).is_err());
        let nominal = NominalDrInformation::default();
        let bounds = WeightBounds::default();
        assert!(matches!(
            DrFactor::weighted(0, 1, Pose::identity(), 0.0, &nominal, &bounds),
            Err(FactorError::WeightOutOfBounds { .. })
        ));
        assert!(DrFactor::weighted(0, 1, Pose::identity(), 0.1, &nominal, &bounds).is_ok());
    }
}
