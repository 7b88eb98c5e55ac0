//! Ideal pinhole camera.

use nalgebra::{Matrix2x3, Vector2, Vector3};

use crate::error::GeometryError;

/// Points closer than this (meters, along the optical axis) are not projected.
pub const Z_MIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    /// 640x480 with a 500 px focal length, principal point at the center.
    fn default() -> Self {
        Self {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(
                "focal lengths must be positive".into(),
            ));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64)
            || !(self.cy >= 0.0 && self.cy < self.height as f64)
        {
            return Err(GeometryError::InvalidIntrinsics(
                "principal point outside the image".into(),
            ));
        }
        Ok(())
    }

    pub fn project(&self, x_cam: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
        if x_cam.z <= Z_MIN {
            return Err(GeometryError::BehindCamera { depth: x_cam.z });
        }
        Ok(Vector2::new(
            self.fx * x_cam.x / x_cam.z + self.cx,
            self.fy * x_cam.y / x_cam.z + self.cy,
        ))
    }

    /// Derivative of [`project`](Self::project) with respect to the camera-frame point.
    pub fn project_jacobian(&self, x_cam: &Vector3<f64>) -> Matrix2x3<f64> {
        let iz = 1.0 / x_cam.z;
        let iz2 = iz * iz;
        Matrix2x3::new(
            self.fx * iz,
            0.0,
            -self.fx * x_cam.x * iz2,
            0.0,
            self.fy * iz,
            -self.fy * x_cam.y * iz2,
        )
    }

    /// Camera-frame point at `depth` along the ray through `pixel`.
    pub fn backproject(&self, pixel: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx * depth,
            (pixel.y - self.cy) / self.fy * depth,
            depth,
        )
    }

    pub fn in_image(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x < self.width as f64
            && pixel.y < self.height as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_axis_hits_principal_point() {
        let k = CameraIntrinsics::default();
        let uv = k.project(&Vector3::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!(uv, Vector2::new(320.0, 240.0));
    }

    #[test]
    fn off_axis_point() {
        let k = CameraIntrinsics::default();
        let uv = k.project(&Vector3::new(1.0, 0.0, 1.0)).unwrap();
        assert_eq!(uv, Vector2::new(820.0, 240.0));
    }

    #[test]
    fn near_plane_guard() {
        let k = CameraIntrinsics::default();
        assert!(matches!(
            k.project(&Vector3::new(0.0, 0.0, 0.01)),
            Err(GeometryError::BehindCamera { .. })
        ));
        assert!(k.project(&Vector3::new(0.0, 0.0, Z_MIN)).is_err());
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 500.0, 320.0, 240.0, 640, 480).is_err());
        assert!(CameraIntrinsics::new(500.0, 500.0, 640.0, 240.0, 640, 480).is_err());
    }

    #[test]
    fn backproject_inverts_project() {
        let k = CameraIntrinsics::default();
        let x = Vector3::new(0.3, -0.4, 2.5);
        let uv = k.project(&x).unwrap();
        assert!((k.backproject(&uv, 2.5) - x).norm() < 1e-12);
    }
}
