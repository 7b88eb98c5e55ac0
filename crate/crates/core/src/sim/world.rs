use nalgebra::{Matrix3, UnitQuaternion, Vector2, Vector3};
use rand::Rng;
use rand_distr::Poisson;

use super::{DensitySegment, TrajectorySpec};
use crate::camera::CameraIntrinsics;
use crate::error::SimError;
use crate::se3::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub id: u64,
    pub position: Vector3<f64>,
}

/// Camera-to-world pose of a forward-looking camera at `position` heading
/// along `yaw` in the horizontal plane (camera x right, y down, z forward).
pub fn camera_pose(position: Vector3<f64>, yaw: f64) -> Pose {
    let (s, c) = yaw.sin_cos();
    let r = Matrix3::new(s, 0.0, c, -c, 0.0, s, 0.0, -1.0, 0.0);
    let q = UnitQuaternion::from_matrix(&r);
    Pose::new(q, position)
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut x = a % two_pi;
    if x > std::f64::consts::PI {
        x -= two_pi;
    } else if x <= -std::f64::consts::PI {
        x += two_pi;
    }
    x
}

/// Polyline with cumulative arc length, closed paths include the return leg.
#[derive(Debug, Clone)]
pub struct Polyline {
    points: Vec<Vector2<f64>>,
    cumulative: Vec<f64>,
    closed: bool,
}

impl Polyline {
    pub fn new(waypoints: &[[f64; 2]], closed: bool) -> Result<Self, SimError> {
        if waypoints.len() < 2 {
            return Err(SimError::DegenerateSpec(
                "at least two waypoints are required".into(),
            ));
        }
        let mut points: Vec<Vector2<f64>> =
            waypoints.iter().map(|w| Vector2::new(w[0], w[1])).collect();
        if closed {
            points.push(points[0]);
        }
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let d = (w[1] - w[0]).norm();
            if d < 1e-9 {
                return Err(SimError::DegenerateSpec("coincident waypoints".into()));
            }
            cumulative.push(cumulative.last().unwrap() + d);
        }
        Ok(Self {
            points,
            cumulative,
            closed,
        })
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn segments(&self) -> usize {
        self.points.len() - 1
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.segments();
        match self.cumulative[1..].iter().position(|&c| s < c) {
            Some(i) => i.min(n - 1),
            None => n - 1,
        }
    }

    fn heading(&self, seg: usize) -> f64 {
        let d = self.points[seg + 1] - self.points[seg];
        d.y.atan2(d.x)
    }

    pub fn position(&self, s: f64) -> Vector2<f64> {
        let s = s.clamp(0.0, self.length());
        let seg = self.segment_at(s);
        let a = self.points[seg];
        let b = self.points[seg + 1];
        let len = self.cumulative[seg + 1] - self.cumulative[seg];
        let u = (s - self.cumulative[seg]) / len;
        if u >= 1.0 {
            return b;
        }
        a + (b - a) * u
    }

    /// Tangent heading with a linear blend of half-width `blend` meters
    /// around every corner.
    pub fn yaw(&self, s: f64, blend: f64) -> f64 {
        let s = s.clamp(0.0, self.length());
        let n = self.segments();
        let seg = self.segment_at(s);
        let min_len = (0..n)
            .map(|i| self.cumulative[i + 1] - self.cumulative[i])
            .fold(f64::INFINITY, f64::min);
        let b = blend.min(0.5 * min_len);
        let h = self.heading(seg);
        if b <= 0.0 {
            return h;
        }
        let start = self.cumulative[seg];
        let end = self.cumulative[seg + 1];
        let corner = |prev: usize, next: usize, offset: f64| {
            let h0 = self.heading(prev);
            let turn = wrap_angle(self.heading(next) - h0);
            let u = (offset + b) / (2.0 * b);
            h0 + turn * u
        };
        if s - start < b {
            let prev = if seg > 0 {
                Some(seg - 1)
            } else if self.closed {
                Some(n - 1)
            } else {
                None
            };
            if let Some(p) = prev {
                return corner(p, seg, s - start);
            }
        }
        if end - s < b {
            let next = if seg + 1 < n {
                Some(seg + 1)
            } else if self.closed {
                Some(0)
            } else {
                None
            };
            if let Some(nx) = next {
                return corner(seg, nx, s - end);
            }
        }
        h
    }

    /// Arc coordinate of the closest point on the polyline to `p`.
    pub fn project(&self, p: &Vector2<f64>) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..self.segments() {
            let a = self.points[i];
            let d = self.points[i + 1] - a;
            let len2 = d.norm_squared();
            let u = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
            let dist = (a + d * u - p).norm_squared();
            if dist < best.0 {
                best = (dist, self.cumulative[i] + u * len2.sqrt());
            }
        }
        best.1
    }
}

/// Ground-truth poses at constant speed along the path.
///
/// `spec.laps` > 1 repeats a closed path; frames are evenly spaced in total
/// arc length and the last frame coincides with the first.
pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<Vec<Pose>, SimError> {
    if spec.frames < 2 {
        return Err(SimError::DegenerateSpec("at least two frames".into()));
    }
    if spec.laps == 0 || (spec.laps > 1 && !spec.closed) {
        return Err(SimError::DegenerateSpec(
            "multiple laps need a closed path".into(),
        ));
    }
    let line = Polyline::new(&spec.waypoints, spec.closed)?;
    let len = line.length();
    let total = len * spec.laps as f64;
    let step = total / (spec.frames - 1) as f64;
    Ok((0..spec.frames)
        .map(|i| {
            let s_total = if i + 1 == spec.frames {
                total
            } else {
                step * i as f64
            };
            let s = lap_coordinate(s_total, len, i + 1 == spec.frames);
            let p = line.position(s);
            camera_pose(
                Vector3::new(p.x, p.y, spec.height),
                line.yaw(s, spec.corner_blend),
            )
        })
        .collect())
}

fn lap_coordinate(s_total: f64, len: f64, last: bool) -> f64 {
    if last {
        return len;
    }
    let s = s_total % len;
    if s < 0.0 {
        0.0
    } else {
        s
    }
}

/// Arc coordinate within a lap of each trajectory frame.
pub fn frame_arc_coordinates(spec: &TrajectorySpec) -> Result<Vec<f64>, SimError> {
    let line = Polyline::new(&spec.waypoints, spec.closed)?;
    let len = line.length();
    let total = len * spec.laps as f64;
    let step = total / (spec.frames.max(2) - 1) as f64;
    Ok((0..spec.frames)
        .map(|i| {
            let s_total = if i + 1 == spec.frames {
                total
            } else {
                step * i as f64
            };
            lap_coordinate(s_total, len, i + 1 == spec.frames)
        })
        .collect())
}

/// Index of the density segment that covers arc coordinate `s`.
pub fn density_segment(profile: &[DensitySegment], s: f64) -> Option<usize> {
    profile
        .iter()
        .position(|d| s < d.until_s)
        .or(if profile.is_empty() {
            None
        } else {
            Some(profile.len() - 1)
        })
}

/// Landmark position in the camera frame of `pose`, if it lies within the
/// depth range and projects inside the image.
pub fn visible(
    camera: &CameraIntrinsics,
    pose: &Pose,
    x: &Vector3<f64>,
    depth_range: (f64, f64),
) -> Option<(Vector3<f64>, Vector2<f64>)> {
    let pc = pose.rotation().inverse() * (x - pose.translation());
    if pc.z < depth_range.0 || pc.z > depth_range.1 {
        return None;
    }
    let uv = camera.project(&pc).ok()?;
    camera.in_image(&uv).then_some((pc, uv))
}

/// Volume of the viewing frustum between the depth limits (cubic meters).
pub fn frustum_volume(camera: &CameraIntrinsics, depth_range: (f64, f64)) -> f64 {
    let (a, b) = depth_range;
    let area = camera.width as f64 * camera.height as f64 / (camera.fx * camera.fy);
    area * (b.powi(3) - a.powi(3)) / 3.0
}

/// Places landmarks as a Poisson field whose density, set per path segment,
/// makes the expected number visible from a frame equal the profile value.
///
/// Each frame draws candidates uniformly over its frustum volume; a candidate
/// is kept only if no earlier frame could see it, and thinned by the density
/// of the segment closest to it. The union of all frusta is thus covered
/// exactly once.
pub fn populate_landmarks<R: Rng>(
    spec: &TrajectorySpec,
    profile: &[DensitySegment],
    trajectory: &[Pose],
    camera: &CameraIntrinsics,
    depth_range: (f64, f64),
    rng: &mut R,
) -> Result<Vec<Landmark>, SimError> {
    let line = Polyline::new(&spec.waypoints, spec.closed)?;
    let max_count = profile.iter().map(|d| d.landmarks).max().unwrap_or(0);
    if max_count == 0 || trajectory.is_empty() {
        return Ok(Vec::new());
    }
    let (a, b) = depth_range;
    let half_w = camera.width as f64 / camera.fx;
    let half_h = camera.height as f64 / camera.fy;
    let reach = b * (1.0 + half_w * half_w + half_h * half_h).sqrt();
    let poisson = Poisson::new(max_count as f64)
        .map_err(|e| SimError::DegenerateSpec(format!("density: {e}")))?;

    let mut landmarks: Vec<Landmark> = Vec::new();
    for (i, pose) in trajectory.iter().enumerate() {
        let n: f64 = rng.sample(poisson);
        for _ in 0..n as usize {
            let uv = Vector2::new(
                rng.random_range(0.0..camera.width as f64),
                rng.random_range(0.0..camera.height as f64),
            );
            let u: f64 = rng.random();
            let depth = (a.powi(3) + u * (b.powi(3) - a.powi(3))).cbrt();
            let keep: f64 = rng.random();
            let x = pose.transform_point(&camera.backproject(&uv, depth));
            let seen_before = trajectory[..i].iter().any(|p| {
                (p.translation() - x).norm() <= reach
                    && visible(camera, p, &x, depth_range).is_some()
            });
            if seen_before {
                continue;
            }
            let arc = line.project(&Vector2::new(x.x, x.y));
            let Some(seg) = density_segment(profile, arc) else {
                continue;
            };
            if keep * max_count as f64 >= profile[seg].landmarks as f64 {
                continue;
            }
            landmarks.push(Landmark {
                id: landmarks.len() as u64,
                position: x,
            });
        }
    }
    Ok(landmarks)
}
