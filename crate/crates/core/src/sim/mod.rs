//! Synthetic sequences: ground-truth trajectory, landmark field with a
//! texture-density profile, per-frame detections and noisy dead reckoning.

mod frame;
mod io;
mod replay;
mod world;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use frame::{perturb_delta, simulate_frame};
pub use io::{read_sequence, write_sequence};
pub use replay::{ingest_replay, interpolate_pose};
pub use world::{
    camera_pose, density_segment, frame_arc_coordinates, frustum_volume, generate_trajectory,
    populate_landmarks, visible, Landmark, Polyline,
};

use crate::camera::CameraIntrinsics;
use crate::error::SimError;
use crate::se3::Pose;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    /// Path vertices in the horizontal plane (meters).
    pub waypoints: Vec<[f64; 2]>,
    pub closed: bool,
    pub laps: usize,
    pub frames: usize,
    /// Camera height above the path plane (meters).
    pub height: f64,
    /// Half-width of the heading blend around corners (meters).
    pub corner_blend: f64,
    pub frame_dt: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            waypoints: vec![[0.0, 0.0], [10.0, 0.0]],
            closed: false,
            laps: 1,
            frames: 200,
            height: 0.0,
            corner_blend: 0.5,
            frame_dt: 0.05,
        }
    }
}

/// Texture level that holds up to arc coordinate `until_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySegment {
    pub until_s: f64,
    /// Landmarks visible per frame.
    pub landmarks: usize,
    /// Unmatchable detections per frame.
    pub clutter: usize,
}

/// Frames `[start, end)` keep only their first `n_det` detections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropOut {
    pub start: usize,
    pub end: usize,
    pub n_det: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrNoise {
    pub sigma_t: f64,
    pub sigma_r_deg: f64,
    /// Multiplicative error on translation increments.
    pub scale_bias: f64,
    /// Heading error added every frame (degrees).
    pub yaw_bias_deg: f64,
}

impl Default for DrNoise {
    fn default() -> Self {
        Self {
            sigma_t: 0.004,
            sigma_r_deg: 0.1,
            scale_bias: 0.0,
            yaw_bias_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub trajectory: TrajectorySpec,
    pub density: Vec<DensitySegment>,
    pub detection_cap: usize,
    pub pixel_std: f64,
    pub dr_noise: DrNoise,
    pub dropouts: Vec<DropOut>,
    pub camera: CameraIntrinsics,
    pub depth_range: (f64, f64),
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            trajectory: TrajectorySpec::default(),
            density: vec![DensitySegment {
                until_s: f64::INFINITY,
                landmarks: 150,
                clutter: 450,
            }],
            detection_cap: 800,
            pixel_std: 1.0,
            dr_noise: DrNoise::default(),
            dropouts: Vec::new(),
            camera: CameraIntrinsics::default(),
            depth_range: (0.3, 8.0),
            seed: 1,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::DegenerateSpec(m.into()));
        if self.detection_cap == 0 {
            return bad("detection cap must be positive");
        }
        if !(self.pixel_std >= 0.0)
            || !(self.dr_noise.sigma_t >= 0.0)
            || !(self.dr_noise.sigma_r_deg >= 0.0)
        {
            return bad("noise standard deviations must be nonnegative");
        }
        if !(self.depth_range.0 > 0.0 && self.depth_range.1 > self.depth_range.0) {
            return bad("invalid depth range");
        }
        if !(self.trajectory.frame_dt > 0.0) {
            return bad("frame period must be positive");
        }
        if self.camera.validate().is_err() {
            return bad("invalid camera intrinsics");
        }
        for d in &self.dropouts {
            if d.end < d.start {
                return bad("drop-out interval ends before it starts");
            }
        }
        Ok(())
    }
}

/// One detected feature; `landmark` is `None` for clutter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub landmark: Option<u64>,
    pub pixel: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub id: u64,
    pub timestamp: f64,
    pub gt: Option<Pose>,
    /// Absolute dead-reckoning pose, anchored at the first ground-truth pose.
    pub odom: Pose,
    /// Dead-reckoning increment from the previous frame, camera frame.
    pub dr_delta: Pose,
    pub detections: Vec<Detection>,
    pub n_det: usize,
    /// Recorded tracked count for replayed sequences without geometry.
    pub n_trk_hint: Option<usize>,
}

impl FrameRecord {
    /// Landmark detections; an upper bound on what tracking can match.
    pub fn landmark_detections(&self) -> usize {
        self.detections.iter().filter(|d| d.landmark.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequence {
    pub camera: CameraIntrinsics,
    pub landmarks: Vec<Landmark>,
    pub frames: Vec<FrameRecord>,
    /// Free-form `key=value` header lines.
    pub meta: Vec<(String, String)>,
}

impl Sequence {
    pub fn landmark(&self, id: u64) -> Option<&Landmark> {
        // Generated ids equal their index; fall back to a search otherwise.
        match self.landmarks.get(id as usize) {
            Some(l) if l.id == id => Some(l),
            _ => self.landmarks.iter().find(|l| l.id == id),
        }
    }

    pub fn has_geometry(&self) -> bool {
        self.frames.iter().all(|f| f.gt.is_some())
    }

    /// Frames `[start, end)` renumbered from zero, odometry re-anchored at
    /// the first frame's ground truth and the first increment reset.
    pub fn segment(&self, start: usize, end: usize) -> Sequence {
        let end = end.min(self.frames.len());
        let start = start.min(end);
        let mut frames: Vec<FrameRecord> = self.frames[start..end].to_vec();
        if let Some(first) = frames.first() {
            let anchor = first.gt.unwrap_or(first.odom);
            let shift = anchor.compose(&first.odom.inverse());
            let t0 = first.timestamp;
            for (i, f) in frames.iter_mut().enumerate() {
                f.id = i as u64;
                f.timestamp -= t0;
                f.odom = shift.compose(&f.odom);
            }
            frames[0].dr_delta = Pose::identity();
            frames[0].odom = anchor;
        }
        Sequence {
            camera: self.camera,
            landmarks: self.landmarks.clone(),
            frames,
            meta: self.meta.clone(),
        }
    }

    /// Plays the sequence `loops` times back to back; each repeat skips its
    /// first frame, which duplicates the last frame of a closed path.
    pub fn repeated(&self, loops: usize) -> Sequence {
        let mut frames = self.frames.clone();
        let n = self.frames.len();
        if n >= 2 {
            let t0 = self.frames[0].timestamp;
            for _ in 1..loops {
                let lap_start = frames.last().unwrap().timestamp;
                for f in &self.frames[1..] {
                    let mut g = f.clone();
                    g.id = frames.len() as u64;
                    g.timestamp = lap_start + (f.timestamp - t0);
                    g.odom = frames.last().unwrap().odom.compose(&f.dr_delta);
                    frames.push(g);
                }
            }
        }
        Sequence {
            camera: self.camera,
            landmarks: self.landmarks.clone(),
            frames,
            meta: self.meta.clone(),
        }
    }
}

/// Seeded generator for an independent stream of the same seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const WORLD_STREAM: u64 = 0;
const DR_STREAM: u64 = 1;
const FRAME_STREAM_BASE: u64 = 16;

/// Builds a complete sequence from `config`.
pub fn generate_sequence(config: &WorldConfig) -> Result<Sequence, SimError> {
    config.validate()?;
    let gt = generate_trajectory(&config.trajectory)?;
    let mut world_rng = stream_rng(config.seed, WORLD_STREAM);
    let landmarks = populate_landmarks(
        &config.trajectory,
        &config.density,
        &gt,
        &config.camera,
        config.depth_range,
        &mut world_rng,
    )?;
    let arcs = frame_arc_coordinates(&config.trajectory)?;
    let mut dr_rng = stream_rng(config.seed, DR_STREAM);

    let mut odom = Vec::with_capacity(gt.len());
    odom.push(gt[0]);
    for i in 1..gt.len() {
        let truth = gt[i - 1].inverse().compose(&gt[i]);
        let noisy = perturb_delta(&truth, &config.dr_noise, &mut dr_rng);
        let next = odom[i - 1].compose(&noisy);
        odom.push(next);
    }

    let mut frames = Vec::with_capacity(gt.len());
    for (i, pose) in gt.iter().enumerate() {
        let mut rng = stream_rng(config.seed, FRAME_STREAM_BASE + i as u64);
        let seg = density_segment(&config.density, arcs[i]);
        let clutter = seg.map_or(0, |s| config.density[s].clutter);
        let detections = simulate_frame(i, pose, &landmarks, clutter, config, &mut rng);
        let dr_delta = if i == 0 {
            Pose::identity()
        } else {
            odom[i - 1].inverse().compose(&odom[i])
        };
        frames.push(FrameRecord {
            id: i as u64,
            timestamp: i as f64 * config.trajectory.frame_dt,
            gt: Some(*pose),
            odom: odom[i],
            dr_delta,
            n_det: detections.len(),
            detections,
            n_trk_hint: None,
        });
    }

    Ok(Sequence {
        camera: config.camera,
        landmarks,
        frames,
        meta: vec![("seed".into(), config.seed.to_string())],
    })
}
