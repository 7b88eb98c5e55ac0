use nalgebra::{Vector2, Vector3, Vector6};
use rand::Rng;
use rand_distr::StandardNormal;

use super::world::{visible, Landmark};
use super::{Detection, DrNoise, WorldConfig};
use crate::se3::Pose;

/// Noisy DR increment: scale bias on translation, per-axis Gaussian noise in
/// the tangent space and a constant heading bias about the vertical axis.
pub fn perturb_delta<R: Rng>(truth: &Pose, noise: &DrNoise, rng: &mut R) -> Pose {
    let mut n = [0.0; 6];
    for v in &mut n {
        *v = rng.sample(StandardNormal);
    }
    let sr = noise.sigma_r_deg.to_radians();
    let xi = Vector6::new(
        noise.sigma_t * n[0],
        noise.sigma_t * n[1],
        noise.sigma_t * n[2],
        sr * n[3],
        sr * n[4],
        sr * n[5],
    );
    let scaled = Pose::new(
        *truth.rotation(),
        truth.translation() * (1.0 + noise.scale_bias),
    );
    let mut out = scaled.retract(&xi);
    if noise.yaw_bias_deg != 0.0 {
        // Camera y points down, so a positive world yaw is a negative turn about y.
        let yaw = Vector6::new(0.0, 0.0, 0.0, 0.0, -noise.yaw_bias_deg.to_radians(), 0.0);
        out = out.retract(&yaw);
    }
    out
}

/// Detections of one frame: noisy projections of visible landmarks in id
/// order, then clutter, truncated to the detection cap and to any drop-out
/// override covering `frame`.
pub fn simulate_frame<R: Rng>(
    frame: usize,
    pose: &Pose,
    landmarks: &[Landmark],
    clutter: usize,
    config: &WorldConfig,
    rng: &mut R,
) -> Vec<Detection> {
    let cam = &config.camera;
    let mut out = Vec::new();
    for l in landmarks {
        if visible(cam, pose, &l.position, config.depth_range).is_none() {
            continue;
        }
        let pc: Vector3<f64> = pose.rotation().inverse() * (l.position - pose.translation());
        let Ok(uv) = cam.project(&pc) else { continue };
        let nu: f64 = rng.sample(StandardNormal);
        let nv: f64 = rng.sample(StandardNormal);
        let px = uv + Vector2::new(nu, nv) * config.pixel_std;
        if cam.in_image(&px) {
            out.push(Detection {
                landmark: Some(l.id),
                pixel: px,
            });
        }
    }
    for _ in 0..clutter {
        let px = Vector2::new(
            rng.random_range(0.0..cam.width as f64),
            rng.random_range(0.0..cam.height as f64),
        );
        out.push(Detection {
            landmark: None,
            pixel: px,
        });
    }
    out.truncate(config.detection_cap);
    for d in &config.dropouts {
        if frame >= d.start && frame < d.end {
            out.truncate(d.n_det);
        }
    }
    out
}
