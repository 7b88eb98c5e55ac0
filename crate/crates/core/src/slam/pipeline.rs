use std::collections::BTreeMap;

use nalgebra::Vector2;

use super::loop_closing::{add_loop_edge, detect_loop_oracle, global_adjustment};
use super::map::SlamMap;
use super::map::KfObservation;
use super::mapping::{insert_keyframe, local_adjustment, NewKeyFrame, NewPoint};
use super::tracking::{decide_keyframe, track_frame, Association, TrackInput};
use super::{Mode, SlamConfig};
use crate::eval::Trajectory;
use crate::quality::{compute_quality, ConnectionReference, TrackingStats};
use crate::se3::Pose;
use crate::sim::{FrameRecord, Sequence};

/// Output of the pipeline for one input frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub id: u64,
    pub timestamp: f64,
    pub pose: Pose,
    pub stats: TrackingStats,
    pub quality: f64,
    /// DR weight used by the motion-only solve, if any.
    pub alpha: Option<f64>,
    /// Solver iterations of the motion-only solve, 0 when none ran.
    pub iterations: usize,
    pub tracked_ok: bool,
    /// Keyframe created from this frame.
    pub keyframe: Option<u64>,
    /// Matched detections as (landmark id, pixel).
    pub observations: Vec<(u64, Vector2<f64>)>,
    pub dr_delta: Pose,
}

/// Keyframe trajectories around one loop closure.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopEvent {
    pub from: u64,
    pub to: u64,
    pub frame: u64,
    pub before: Trajectory,
    pub after: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub frames: Vec<FrameResult>,
    pub map: SlamMap,
    pub loops: Vec<LoopEvent>,
    /// Frame at which vision-only tracking was declared lost.
    pub lost_at: Option<u64>,
}

impl RunOutput {
    pub fn frame_trajectory(&self) -> Trajectory {
        let mut t = Trajectory::new();
        for f in &self.frames {
            t.push(f.timestamp, f.pose);
        }
        t
    }

    pub fn keyframe_trajectory(&self) -> Trajectory {
        keyframe_trajectory(&self.map)
    }

    pub fn tracked_flags(&self) -> Vec<bool> {
        self.frames.iter().map(|f| f.tracked_ok).collect()
    }

    pub fn completed(&self) -> bool {
        self.lost_at.is_none()
    }
}

fn keyframe_trajectory(map: &SlamMap) -> Trajectory {
    let mut t = Trajectory::new();
    for kf in map.keyframes.values() {
        t.push(kf.timestamp, kf.pose);
    }
    t
}

/// Sequential track, map and loop-close pipeline.
pub struct Pipeline {
    config: SlamConfig,
    map: SlamMap,
    frames: Vec<FrameResult>,
    loops: Vec<LoopEvent>,
    prev_pose: Pose,
    velocity: Pose,
    dr_since_kf: Pose,
    frames_since_kf: usize,
    weak_streak: usize,
    lost_at: Option<u64>,
    last_loop: Option<u64>,
    kf_truth: BTreeMap<u64, Pose>,
}

impl Pipeline {
    pub fn new(config: SlamConfig, camera: crate::camera::CameraIntrinsics) -> Self {
        let c_ref = ConnectionReference::new(config.c_ref_init, config.q_well, config.c_ref_window);
        Self::with_map(config, SlamMap::new(camera, c_ref))
    }

    /// Continues from an existing map, as in a run that is never reset.
    pub fn with_map(config: SlamConfig, map: SlamMap) -> Self {
        Self {
            config,
            map,
            frames: Vec::new(),
            loops: Vec::new(),
            prev_pose: Pose::identity(),
            velocity: Pose::identity(),
            dr_since_kf: Pose::identity(),
            frames_since_kf: 0,
            weak_streak: 0,
            lost_at: None,
            last_loop: None,
            kf_truth: BTreeMap::new(),
        }
    }

    pub fn map(&self) -> &SlamMap {
        &self.map
    }

    pub fn frames(&self) -> &[FrameResult] {
        &self.frames
    }

    /// Processes the next frame. `seq` supplies landmark geometry for depth.
    pub fn step(&mut self, frame: &FrameRecord, seq: &Sequence) -> &FrameResult {
        let result = if self.frames.is_empty() {
            self.initialize(frame, seq)
        } else if self.lost_at.is_some() {
            self.coast(frame)
        } else {
            self.track(frame, seq)
        };
        self.frames.push(result);
        self.frames.last().unwrap()
    }

    pub fn finish(self) -> RunOutput {
        RunOutput {
            frames: self.frames,
            map: self.map,
            loops: self.loops,
            lost_at: self.lost_at,
        }
    }

    fn initialize(&mut self, frame: &FrameRecord, seq: &Sequence) -> FrameResult {
        let pose = frame.odom;
        let stats = TrackingStats::new(frame.n_det, 0);
        let quality = compute_quality(stats, &self.config.quality);
        self.prev_pose = pose;
        let association = Association {
            matches: Vec::new(),
            unmatched: (0..frame.detections.len()).collect(),
        };
        let keyframe = if self.config.mode == Mode::DrOnly {
            None
        } else {
            Some(self.make_keyframe(frame, seq, pose, quality, &association))
        };
        FrameResult {
            id: frame.id,
            timestamp: frame.timestamp,
            pose,
            stats,
            quality,
            alpha: None,
            iterations: 0,
            tracked_ok: true,
            keyframe,
            observations: Vec::new(),
            dr_delta: frame.dr_delta,
        }
    }

    /// After tracking is lost the vision-only pipeline has no motion source
    /// and holds its last pose.
    fn coast(&mut self, frame: &FrameRecord) -> FrameResult {
        let pose = self.prev_pose;
        let stats = TrackingStats::new(frame.n_det, 0);
        FrameResult {
            id: frame.id,
            timestamp: frame.timestamp,
            pose,
            stats,
            quality: compute_quality(stats, &self.config.quality),
            alpha: None,
            iterations: 0,
            tracked_ok: false,
            keyframe: None,
            observations: Vec::new(),
            dr_delta: frame.dr_delta,
        }
    }

    fn track(&mut self, frame: &FrameRecord, seq: &Sequence) -> FrameResult {
        let input = TrackInput {
            detections: &frame.detections,
            n_det: frame.n_det,
            n_trk_hint: frame.n_trk_hint,
            dr_delta: frame.dr_delta,
            prev_pose: self.prev_pose,
            velocity: self.velocity,
        };
        let tracked = track_frame(&input, &self.map, &self.config);
        let mode = self.config.mode;

        if mode == Mode::VisionOnly {
            if tracked.stats.n_trk < self.config.min_inliers {
                self.weak_streak += 1;
                if self.weak_streak >= self.config.lost_frames {
                    self.lost_at = Some(frame.id);
                    tracing::info!("tracking lost at frame {}", frame.id);
                }
            } else {
                self.weak_streak = 0;
            }
        }

        self.velocity = self.prev_pose.inverse().compose(&tracked.pose);
        self.prev_pose = tracked.pose;
        self.dr_since_kf = self.dr_since_kf.compose(&frame.dr_delta);
        self.frames_since_kf += 1;

        let mut keyframe = None;
        let eligible = mode != Mode::DrOnly
            && self.lost_at.is_none()
            && (tracked.tracked_ok || mode.uses_dr_factors());
        if eligible {
            if let Some(last) = self.map.last_keyframe() {
                let moved = (tracked.pose.translation() - last.pose.translation()).norm();
                if decide_keyframe(
                    self.frames_since_kf,
                    tracked.stats.n_trk,
                    last.tracked_points,
                    moved,
                    &self.config,
                ) {
                    let id =
                        self.make_keyframe(frame, seq, tracked.pose, tracked.quality, &tracked.association);
                    self.prev_pose = self.map.keyframes[&id].pose;
                    keyframe = Some(id);
                }
            }
        }

        let observations = tracked
            .association
            .matches
            .iter()
            .map(|m| (self.map.points.get(&m.point).map_or(u64::MAX, |p| p.landmark), m.pixel))
            .collect();
        FrameResult {
            id: frame.id,
            timestamp: frame.timestamp,
            pose: tracked.pose,
            stats: tracked.stats,
            quality: tracked.quality,
            alpha: tracked.alpha,
            iterations: tracked.report.as_ref().map_or(0, |r| r.iterations),
            tracked_ok: tracked.tracked_ok,
            keyframe,
            observations,
            dr_delta: frame.dr_delta,
        }
    }

    /// Promotes the frame to keyframe, runs local adjustment and, when the
    /// oracle fires, loop closure. Returns the keyframe id.
    fn make_keyframe(
        &mut self,
        frame: &FrameRecord,
        seq: &Sequence,
        pose: Pose,
        quality: f64,
        association: &Association,
    ) -> u64 {
        let depth_of = |landmark: u64| -> Option<f64> {
            let truth = frame.gt?;
            let lm = seq.landmark(landmark)?;
            let z = (truth.rotation().inverse() * (lm.position - truth.translation())).z;
            (z > crate::camera::Z_MIN).then_some(z)
        };
        let mut new_points = Vec::new();
        for &i in &association.unmatched {
            let d = &frame.detections[i];
            let Some(id) = d.landmark else { continue };
            let Some(depth) = depth_of(id) else { continue };
            let pc = self.map.camera.backproject(&d.pixel, depth);
            new_points.push(NewPoint {
                landmark: id,
                pixel: d.pixel,
                position: pose.transform_point(&pc),
                depth: Some(depth),
            });
        }
        let matches = association
            .matches
            .iter()
            .map(|m| KfObservation {
                point: m.point,
                pixel: m.pixel,
                depth: depth_of(self.map.points[&m.point].landmark),
            })
            .collect();
        let dr_from_last = self.map.last_keyframe().map(|_| self.dr_since_kf);
        let id = insert_keyframe(
            &mut self.map,
            NewKeyFrame {
                frame_id: frame.id,
                timestamp: frame.timestamp,
                pose,
                quality,
                matches,
                new_points,
                dr_from_last,
            },
            &self.config,
        );
        self.dr_since_kf = Pose::identity();
        self.frames_since_kf = 0;
        local_adjustment(&mut self.map, id, &self.config);

        if let Some(truth) = frame.gt {
            self.kf_truth.insert(id, truth);
            if self.config.loop_enabled {
                self.close_loop(id, frame.id);
            }
        }
        id
    }

    fn close_loop(&mut self, kf: u64, frame: u64) {
        let Some(candidate) = detect_loop_oracle(&self.map, kf, &self.kf_truth, self.last_loop, &self.config)
        else {
            return;
        };
        let before = keyframe_trajectory(&self.map);
        add_loop_edge(&mut self.map, &candidate, &self.config);
        if let Err(e) = global_adjustment(&mut self.map, &self.config) {
            tracing::warn!("global adjustment after loop {} -> {kf} failed: {e}", candidate.from);
        }
        if self.map.fuse_duplicates() > 0 {
            if let Err(e) = global_adjustment(&mut self.map, &self.config) {
                tracing::warn!("global adjustment after fusion failed: {e}");
            }
        }
        self.last_loop = Some(kf);
        self.loops.push(LoopEvent {
            from: candidate.from,
            to: kf,
            frame,
            before,
            after: keyframe_trajectory(&self.map),
        });
    }
}

/// Runs the pipeline over every frame of `seq`.
pub fn run_sequence(seq: &Sequence, config: &SlamConfig) -> RunOutput {
    let mut p = Pipeline::new(config.clone(), seq.camera);
    for f in &seq.frames {
        p.step(f, seq);
    }
    p.finish()
}
