use nalgebra::Vector2;

use super::map::SlamMap;
use super::{Mode, SlamConfig};
use crate::factors::{DrFactor, ReprojectionFactor};
use crate::optimizer::{solve_motion_only, Problem, SolverReport};
use crate::quality::{compute_quality, dr_weight, TrackingStats};
use crate::se3::Pose;
use crate::sim::Detection;

/// Pose predicted by chaining a relative motion onto the previous pose.
pub fn predict_pose(prev: &Pose, delta: &Pose) -> Pose {
    prev.compose(delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub point: u64,
    pub pixel: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    pub matches: Vec<Match>,
    /// Indices of landmark detections left without a map point.
    pub unmatched: Vec<usize>,
}

/// Matches detections to map points of the same landmark whose projection
/// under `predicted` falls within `radius` pixels of the detection.
pub fn associate_features(
    detections: &[Detection],
    map: &SlamMap,
    predicted: &Pose,
    radius: f64,
) -> Association {
    let r_inv = predicted.rotation().inverse();
    let t = predicted.translation();
    let mut out = Association::default();
    for (i, d) in detections.iter().enumerate() {
        let Some(landmark) = d.landmark else { continue };
        let mut best: Option<(f64, u64)> = None;
        for &pid in map.points_for_landmark(landmark) {
            let p = &map.points[&pid];
            let pc = r_inv * (p.position - t);
            let Ok(uv) = map.camera.project(&pc) else {
                continue;
            };
            let dist = (uv - d.pixel).norm();
            if dist <= radius && best.is_none_or(|(b, _)| dist < b) {
                best = Some((dist, pid));
            }
        }
        match best {
            Some((_, point)) => out.matches.push(Match {
                point,
                pixel: d.pixel,
            }),
            None => out.unmatched.push(i),
        }
    }
    out
}

pub struct TrackInput<'a> {
    pub detections: &'a [Detection],
    pub n_det: usize,
    /// Recorded tracked count when the frame carries no detections.
    pub n_trk_hint: Option<usize>,
    pub dr_delta: Pose,
    pub prev_pose: Pose,
    /// Last inter-frame motion, for constant-velocity prediction.
    pub velocity: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedFrame {
    pub pose: Pose,
    pub predicted: Pose,
    pub stats: TrackingStats,
    pub quality: f64,
    pub alpha: Option<f64>,
    pub report: Option<SolverReport>,
    pub tracked_ok: bool,
    pub association: Association,
}

/// Predicts, associates, scores and refines the pose of one frame.
///
/// A failed or impossible solve leaves the pose at the prediction with
/// `tracked_ok` false.
pub fn track_frame(input: &TrackInput<'_>, map: &SlamMap, config: &SlamConfig) -> TrackedFrame {
    let mode = config.mode;
    let predicted = if mode.uses_dr_prediction() {
        predict_pose(&input.prev_pose, &input.dr_delta)
    } else {
        predict_pose(&input.prev_pose, &input.velocity)
    };
    let association = if mode == Mode::DrOnly {
        Association::default()
    } else {
        associate_features(input.detections, map, &predicted, config.search_radius)
    };
    let n_trk = match input.n_trk_hint {
        Some(h) if input.detections.is_empty() => h,
        _ => association.matches.len(),
    };
    let stats = TrackingStats::new(input.n_det, n_trk.min(input.n_det));
    let quality = compute_quality(stats, &config.quality);

    let bounds = config.effective_bounds();
    let alpha = match mode {
        Mode::Adaptive => Some(dr_weight(quality, &bounds)),
        Mode::FixedDr => Some(config.fixed_alpha),
        _ => None,
    };

    let mut out = TrackedFrame {
        pose: predicted,
        predicted,
        stats,
        quality,
        alpha,
        report: None,
        tracked_ok: false,
        association,
    };
    if mode == Mode::DrOnly {
        out.tracked_ok = true;
        return out;
    }
    let visual = out.association.matches.len();
    if alpha.is_none() && visual < 3 {
        return out;
    }

    let mut problem = Problem::new();
    let cur = if let Some(a) = alpha {
        let prev = problem.add_pose(0, input.prev_pose, true);
        let cur = problem.add_pose(1, predicted, false);
        match DrFactor::weighted(prev, cur, input.dr_delta, a, &config.nominal, &bounds) {
            Ok(f) => {
                let _ = problem.add_dr(f);
            }
            Err(e) => tracing::warn!("DR factor rejected: {e}"),
        }
        cur
    } else {
        problem.add_pose(1, predicted, false)
    };
    let threshold = config.huber_threshold();
    for m in &out.association.matches {
        let point = &map.points[&m.point];
        let l = problem.add_landmark(point.id, point.position, true);
        if let Ok(f) = ReprojectionFactor::with_threshold(
            cur,
            l,
            m.pixel,
            config.pixel_std,
            threshold,
            map.camera,
        ) {
            let _ = problem.add_reprojection(f);
        }
    }
    match solve_motion_only(&mut problem, &config.motion_solver) {
        Ok(report) if problem.poses[cur].pose.is_finite() => {
            out.pose = problem.poses[cur].pose;
            out.report = Some(report);
            out.tracked_ok = alpha.is_some() || stats.n_trk >= config.min_inliers;
        }
        Ok(_) => {}
        Err(e) => tracing::debug!("motion-only solve failed: {e}"),
    }
    out
}

/// Keyframe test on frame gap, tracked-point overlap and distance travelled.
///
/// An overlap of `0 / 0` counts as full overlap.
pub fn decide_keyframe(
    frames_since: usize,
    n_trk: usize,
    reference_tracked: usize,
    translation_since: f64,
    config: &SlamConfig,
) -> bool {
    let overlap = if reference_tracked == 0 {
        if n_trk == 0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        n_trk as f64 / reference_tracked as f64
    };
    frames_since >= config.k_max || overlap < config.overlap_ratio || translation_since > config.d_max
}
