//! SE(3) rigid-body transforms and their tangent space.
//!
//! Poses are stored as a unit quaternion plus a translation. The quaternion is
//! kept canonical (`w >= 0`) so that equal rotations compare equal.
//!
//! Tangent vectors use `(rho, phi)` ordering: translational part first, then
//! the rotation vector. Jacobians throughout the crate are taken with respect
//! to a right-multiplicative perturbation `T * exp(delta)`.

use nalgebra::{Matrix3, Matrix4, Matrix6, Quaternion, UnitQuaternion, Vector3, Vector6};
use std::fmt;

use crate::error::GeometryError;

/// Below this rotation angle (radians) closed-form coefficients switch to
/// their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Rotations at or above `PI - NEAR_PI_MARGIN` have no unique logarithm.
pub const NEAR_PI_MARGIN: f64 = 1e-6;

/// Element of the tangent space se(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    /// Translational component (meters).
    pub rho: Vector3<f64>,
    /// Rotation vector (radians).
    pub phi: Vector3<f64>,
}

impl Twist {
    pub fn new(rho: Vector3<f64>, phi: Vector3<f64>) -> Self {
        Self { rho, phi }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.rho.x, self.rho.y, self.rho.z, self.phi.x, self.phi.y, self.phi.z,
        )
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

/// Rigid transform in SE(3).
#[derive(Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl fmt::Debug for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.rotation.quaternion();
        write!(
            f,
            "Pose(t: [{:.6}, {:.6}, {:.6}], q: [{:.6}, {:.6}, {:.6}, {:.6}])",
            self.translation.x,
            self.translation.y,
            self.translation.z,
            q.i,
            q.j,
            q.k,
            q.w
        )
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let q = UnitQuaternion::new_normalize(q.into_inner());
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: canonical(rotation),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    /// Builds a pose from raw quaternion components `(x, y, z, w)`.
    ///
    /// Components already normalized to within 1e-12 are kept bit-exact so
    /// that text round trips reproduce the same bytes.
    pub fn from_components(t: [f64; 3], q_xyzw: [f64; 4]) -> Option<Self> {
        let q = Quaternion::new(q_xyzw[3], q_xyzw[0], q_xyzw[1], q_xyzw[2]);
        let norm = q.norm();
        if !norm.is_finite() || norm < 1e-9 || t.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let translation = Vector3::new(t[0], t[1], t[2]);
        if (norm - 1.0).abs() < 1e-12 && q.w >= 0.0 {
            Some(Self {
                rotation: UnitQuaternion::new_unchecked(q),
                translation,
            })
        } else {
            Some(Self::new(UnitQuaternion::new_normalize(q), translation))
        }
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Group product `self * other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose::new(r_inv, -(r_inv * self.translation))
    }

    /// `R x + t`.
    pub fn transform_point(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Rotation angle in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        let q = self.rotation.quaternion();
        2.0 * q.imag().norm().atan2(q.w.abs())
    }

    /// Adjoint in `(rho, phi)` ordering: `T exp(x) T^-1 = exp(Ad_T x)`.
    pub fn adjoint(&self) -> Matrix6<f64> {
        let r = self.rotation_matrix();
        let mut ad = Matrix6::zeros();
        ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
        ad.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(skew(&self.translation) * r));
        ad
    }

    pub fn exp(xi: &Twist) -> Pose {
        exp_se3(xi)
    }

    pub fn log(&self) -> Result<Twist, GeometryError> {
        log_se3(self)
    }

    /// `self * exp(delta)`.
    pub fn retract(&self, delta: &Vector6<f64>) -> Pose {
        self.compose(&exp_se3(&Twist::from_vector(delta)))
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite())
            && self.rotation.coords.iter().all(|v| v.is_finite())
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation vector to unit quaternion.
pub fn exp_so3(phi: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta = phi.norm();
    let half = 0.5 * theta;
    let (w, k) = if theta < SMALL_ANGLE {
        // sin(h)/theta = 1/2 - theta^2/48
        (1.0 - theta * theta / 8.0, 0.5 - theta * theta / 48.0)
    } else {
        (half.cos(), half.sin() / theta)
    };
    canonical(UnitQuaternion::new_unchecked(Quaternion::new(
        w,
        k * phi.x,
        k * phi.y,
        k * phi.z,
    )))
}

/// Unit quaternion to rotation vector, angle in `[0, pi]`.
pub fn log_so3(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = q.quaternion();
    let (w, v) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let n = v.norm();
    if n < SMALL_ANGLE {
        // theta / n = 2/w (1 - n^2 / (3 w^2))
        v * (2.0 / w * (1.0 - n * n / (3.0 * w * w)))
    } else {
        v * (2.0 * n.atan2(w) / n)
    }
}

/// Left Jacobian of SO(3).
pub fn left_jacobian_so3(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    let k2 = k * k;
    if theta < SMALL_ANGLE {
        Matrix3::identity() + 0.5 * k + k2 / 6.0
    } else {
        let t2 = theta * theta;
        let s = (0.5 * theta).sin();
        let a = 2.0 * s * s / t2;
        let b = (theta - theta.sin()) / (t2 * theta);
        Matrix3::identity() + a * k + b * k2
    }
}

pub fn left_jacobian_so3_inverse(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    let k2 = k * k;
    if theta < SMALL_ANGLE {
        Matrix3::identity() - 0.5 * k + k2 / 12.0
    } else {
        let t2 = theta * theta;
        let c = 1.0 / t2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
        Matrix3::identity() - 0.5 * k + c * k2
    }
}

/// Below this angle the coupling block uses its Taylor series; the closed
/// forms cancel badly for small angles.
const Q_SERIES_ANGLE: f64 = 1e-2;

/// Coupling block of the SE(3) left Jacobian.
fn q_block(rho: &Vector3<f64>, phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let p = skew(phi);
    let r = skew(rho);
    let pr = p * r;
    let rp = r * p;
    let prp = p * r * p;
    let ppr = p * pr;
    let rpp = rp * p;
    let prpp = prp * p;
    let pprp = p * prp;
    let (c1, c2, c3) = if theta < Q_SERIES_ANGLE {
        let t2 = theta * theta;
        (
            1.0 / 6.0 - t2 / 120.0,
            1.0 / 24.0 - t2 / 720.0,
            1.0 / 120.0 - t2 / 2520.0,
        )
    } else {
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let t4 = t2 * t2;
        let t5 = t4 * theta;
        let c1 = (theta - theta.sin()) / t3;
        let c2 = (t2 / 2.0 + theta.cos() - 1.0) / t4;
        let c3 = (2.0 * theta - 3.0 * theta.sin() + theta * theta.cos()) / (2.0 * t5);
        (c1, c2, c3)
    };
    0.5 * r + c1 * (pr + rp + prp) + c2 * (ppr + rpp - 3.0 * prp) + c3 * (prpp + pprp)
}

/// Left Jacobian of SE(3) in `(rho, phi)` ordering.
pub fn left_jacobian_se3(xi: &Twist) -> Matrix6<f64> {
    let jl = left_jacobian_so3(&xi.phi);
    let mut j = Matrix6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&jl);
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&jl);
    j.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&q_block(&xi.rho, &xi.phi));
    j
}

pub fn left_jacobian_se3_inverse(xi: &Twist) -> Matrix6<f64> {
    let jl_inv = left_jacobian_so3_inverse(&xi.phi);
    let q = q_block(&xi.rho, &xi.phi);
    let mut j = Matrix6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&jl_inv);
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&jl_inv);
    j.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(-jl_inv * q * jl_inv));
    j
}

/// Right Jacobian of SE(3): `exp(xi + d) ~ exp(xi) exp(Jr d)`.
pub fn right_jacobian_se3(xi: &Twist) -> Matrix6<f64> {
    left_jacobian_se3(&Twist::new(-xi.rho, -xi.phi))
}

pub fn right_jacobian_se3_inverse(xi: &Twist) -> Matrix6<f64> {
    left_jacobian_se3_inverse(&Twist::new(-xi.rho, -xi.phi))
}

pub fn exp_se3(xi: &Twist) -> Pose {
    Pose::new(exp_so3(&xi.phi), left_jacobian_so3(&xi.phi) * xi.rho)
}

pub fn log_se3(p: &Pose) -> Result<Twist, GeometryError> {
    let angle = p.rotation_angle();
    if angle >= std::f64::consts::PI - NEAR_PI_MARGIN {
        return Err(GeometryError::AngleNearPi { angle });
    }
    let phi = log_so3(&p.rotation);
    let rho = left_jacobian_so3_inverse(&phi) * p.translation;
    Ok(Twist::new(rho, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_twist_is_identity() {
        let p = exp_se3(&Twist::zero());
        assert_eq!(p, Pose::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let p = exp_se3(&Twist::new(Vector3::zeros(), Vector3::new(0.0, 0.0, PI / 2.0)));
        let x = p.transform_point(&Vector3::x());
        assert!((x - Vector3::y()).norm() < 1e-12);
        assert!(p.translation().norm() < 1e-15);
    }

    #[test]
    fn log_identity_is_zero() {
        let xi = log_se3(&Pose::identity()).unwrap();
        assert_eq!(xi.norm(), 0.0);
    }

    #[test]
    fn log_rejects_rotation_near_pi() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI - 1e-9);
        let p = Pose::new(q, Vector3::new(1.0, 0.0, 0.0));
        assert!(matches!(log_se3(&p), Err(GeometryError::AngleNearPi { .. })));
    }

    #[test]
    fn canonical_quaternion_has_nonnegative_w() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 1.9 * PI);
        let p = Pose::new(q, Vector3::zeros());
        assert!(p.rotation().w >= 0.0);
    }

    #[test]
    fn small_angle_branch_is_continuous() {
        let rho = Vector3::new(0.3, -0.2, 0.5);
        let axis = Vector3::new(0.2, 0.5, -0.7).normalize();
        let below = Twist::new(rho, axis * (SMALL_ANGLE * 0.999));
        let above = Twist::new(rho, axis * (SMALL_ANGLE * 1.001));
        let jb = right_jacobian_se3_inverse(&below);
        let ja = right_jacobian_se3_inverse(&above);
        assert!((jb - ja).norm() < 1e-8);
        let pb = exp_se3(&below);
        let pa = exp_se3(&above);
        assert!((pb.translation() - pa.translation()).norm() < 1e-8);
    }

    #[test]
    fn left_jacobian_inverse_matches_matrix_inverse() {
        let xi = Twist::new(Vector3::new(0.4, -1.2, 0.7), Vector3::new(0.9, -0.3, 1.4));
        let j = left_jacobian_se3(&xi);
        let ji = left_jacobian_se3_inverse(&xi);
        assert!((j * ji - Matrix6::identity()).norm() < 1e-12);
    }
}
