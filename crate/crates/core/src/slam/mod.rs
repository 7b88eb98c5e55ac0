//! Keyframe-based visual SLAM: frame tracking against the map, keyframe
//! insertion with local bundle adjustment, loop closure with global bundle
//! adjustment, and map persistence.
//!
//! The pipeline runs sequentially (track, map, close loops) for each frame,
//! which keeps every run reproducible bit for bit.

mod loop_closing;
mod map;
mod mapping;
mod persistence;
mod pipeline;
mod tracking;

use std::fmt;
use std::str::FromStr;

pub use loop_closing::{detect_loop_oracle, global_adjustment, LoopCandidate};
pub use map::{DrEdge, KeyFrame, KfObservation, LoopEdge, MapPoint, SlamMap};
pub use mapping::{insert_keyframe, local_adjustment, NewKeyFrame, NewPoint};
pub use persistence::{load_map, parse_map, save_map, serialize_map};
pub use pipeline::{run_sequence, FrameResult, LoopEvent, Pipeline, RunOutput};
pub use tracking::{
    associate_features, decide_keyframe, predict_pose, track_frame, Association, TrackInput,
    TrackedFrame,
};

use crate::optimizer::SolverConfig;
use crate::quality::{NominalDrInformation, QualityParams, WeightBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// Constant-velocity prediction, no DR anywhere.
    VisionOnly,
    /// DR prediction for association only, no DR factors.
    DaOnly,
    /// DR factors with one constant weight.
    FixedDr,
    /// DR factors weighted by tracking quality.
    Adaptive,
    /// Integrated odometry, no vision.
    DrOnly,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::VisionOnly,
        Mode::DaOnly,
        Mode::FixedDr,
        Mode::Adaptive,
        Mode::DrOnly,
    ];

    pub fn uses_dr_factors(self) -> bool {
        matches!(self, Mode::FixedDr | Mode::Adaptive)
    }

    pub fn uses_dr_prediction(self) -> bool {
        !matches!(self, Mode::VisionOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::VisionOnly => "vision-only",
            Mode::DaOnly => "da-only",
            Mode::FixedDr => "fixed-dr",
            Mode::Adaptive => "adaptive",
            Mode::DrOnly => "dr-only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown mode '{s}' (expected one of vision-only, da-only, fixed-dr, adaptive, dr-only)"
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlamConfig {
    pub mode: Mode,
    pub quality: QualityParams,
    pub bounds: WeightBounds,
    pub nominal: NominalDrInformation,
    /// Weight used everywhere in fixed-DR mode.
    pub fixed_alpha: f64,
    pub c_ref_init: f64,
    pub q_well: f64,
    pub c_ref_window: usize,
    pub smoothing_half_width: usize,
    pub pixel_std: f64,
    /// Huber threshold in units of the pixel standard deviation.
    pub huber_sigmas: f64,
    /// Depth standard deviation per squared meter of depth; 0 disables
    /// depth terms in bundle adjustment.
    pub depth_noise: f64,
    pub search_radius: f64,
    pub min_inliers: usize,
    pub lost_frames: usize,
    pub k_max: usize,
    pub overlap_ratio: f64,
    pub d_max: f64,
    pub covisible_limit: usize,
    pub loop_enabled: bool,
    pub loop_radius: f64,
    pub loop_gap_min: usize,
    pub loop_info_scale: f64,
    pub solver: SolverConfig,
    pub motion_solver: SolverConfig,
}

impl Default for SlamConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Adaptive,
            quality: QualityParams::default(),
            bounds: WeightBounds::default(),
            nominal: NominalDrInformation::default(),
            fixed_alpha: 1.0,
            c_ref_init: 20.0,
            q_well: 0.8,
            c_ref_window: 10,
            smoothing_half_width: 2,
            pixel_std: 1.0,
            huber_sigmas: crate::factors::HUBER_SIGMAS,
            depth_noise: 0.005,
            search_radius: 20.0,
            min_inliers: 10,
            lost_frames: 5,
            k_max: 15,
            overlap_ratio: 0.5,
            d_max: 0.5,
            covisible_limit: 20,
            loop_enabled: true,
            loop_radius: 0.5,
            loop_gap_min: 30,
            loop_info_scale: 100.0,
            solver: SolverConfig::default(),
            motion_solver: SolverConfig::motion_only(),
        }
    }
}

impl SlamConfig {
    /// Weight bounds in effect, widened to admit the fixed weight when needed.
    pub fn effective_bounds(&self) -> WeightBounds {
        if self.mode == Mode::FixedDr {
            self.bounds.widened_to(self.fixed_alpha)
        } else {
            self.bounds
        }
    }

    pub fn huber_threshold(&self) -> f64 {
        self.huber_sigmas * self.pixel_std
    }
}
