use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Vector2, Vector3};

use crate::camera::CameraIntrinsics;
use crate::quality::ConnectionReference;
use crate::se3::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfObservation {
    pub point: u64,
    pub pixel: Vector2<f64>,
    /// Measured depth, when the sensor provides one.
    pub depth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyFrame {
    pub id: u64,
    pub frame_id: u64,
    pub timestamp: f64,
    pub pose: Pose,
    pub observations: Vec<KfObservation>,
    /// Shared observation count with every covisible keyframe.
    pub covisibility: BTreeMap<u64, usize>,
    /// DR weight of the edge to the previous keyframe from the last local BA.
    pub lba_alpha: f64,
    /// Tracking quality of the source frame.
    pub quality: f64,
    /// Points tracked or created at insertion; reference for the overlap test.
    pub tracked_points: usize,
}

impl KeyFrame {
    pub fn connection_count(&self, other: u64) -> usize {
        self.covisibility.get(&other).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint {
    pub id: u64,
    /// Identity of the physical landmark this point was triangulated from.
    pub landmark: u64,
    pub position: Vector3<f64>,
    pub observers: BTreeSet<u64>,
    /// Local bundle adjustments this point took part in.
    pub lba_count: u32,
}

/// Relative-pose prior between temporally adjacent keyframes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrEdge {
    pub from: u64,
    pub to: u64,
    pub delta: Pose,
    pub alpha: f64,
}

/// Loop constraint; information is `info_scale` times the nominal DR information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopEdge {
    pub from: u64,
    pub to: u64,
    pub delta: Pose,
    pub info_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlamMap {
    pub camera: CameraIntrinsics,
    pub keyframes: BTreeMap<u64, KeyFrame>,
    pub points: BTreeMap<u64, MapPoint>,
    pub dr_edges: Vec<DrEdge>,
    pub loop_edges: Vec<LoopEdge>,
    pub c_ref: ConnectionReference,
    pub next_keyframe_id: u64,
    pub next_point_id: u64,
    /// Map points per landmark identity, duplicates included.
    landmark_index: BTreeMap<u64, Vec<u64>>,
}

impl SlamMap {
    pub fn new(camera: CameraIntrinsics, c_ref: ConnectionReference) -> Self {
        Self {
            camera,
            keyframes: BTreeMap::new(),
            points: BTreeMap::new(),
            dr_edges: Vec::new(),
            loop_edges: Vec::new(),
            c_ref,
            next_keyframe_id: 0,
            next_point_id: 0,
            landmark_index: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty() && self.points.is_empty()
    }

    pub fn last_keyframe(&self) -> Option<&KeyFrame> {
        self.keyframes.values().next_back()
    }

    pub fn points_for_landmark(&self, landmark: u64) -> &[u64] {
        self.landmark_index
            .get(&landmark)
            .map_or(&[], |v| v.as_slice())
    }

    pub fn add_point(&mut self, landmark: u64, position: Vector3<f64>) -> u64 {
        let id = self.next_point_id;
        self.next_point_id += 1;
        self.points.insert(
            id,
            MapPoint {
                id,
                landmark,
                position,
                observers: BTreeSet::new(),
                lba_count: 0,
            },
        );
        self.landmark_index.entry(landmark).or_default().push(id);
        id
    }

    /// Inserts a keyframe whose observations reference existing points and
    /// updates observers and covisibility on both endpoints.
    pub fn add_keyframe(&mut self, mut kf: KeyFrame) -> u64 {
        let id = self.next_keyframe_id;
        self.next_keyframe_id += 1;
        kf.id = id;
        kf.covisibility.clear();
        let mut shared: BTreeMap<u64, usize> = BTreeMap::new();
        for obs in &kf.observations {
            if let Some(p) = self.points.get_mut(&obs.point) {
                for &other in &p.observers {
                    *shared.entry(other).or_default() += 1;
                }
                p.observers.insert(id);
            }
        }
        for (&other, &count) in &shared {
            if let Some(o) = self.keyframes.get_mut(&other) {
                *o.covisibility.entry(id).or_default() += count;
            }
        }
        kf.covisibility = shared;
        self.keyframes.insert(id, kf);
        id
    }

    fn remove_point(&mut self, id: u64) {
        if let Some(p) = self.points.remove(&id) {
            if let Some(v) = self.landmark_index.get_mut(&p.landmark) {
                v.retain(|&x| x != id);
                if v.is_empty() {
                    self.landmark_index.remove(&p.landmark);
                }
            }
            for kf in &p.observers {
                if let Some(k) = self.keyframes.get_mut(kf) {
                    k.observations.retain(|o| o.point != id);
                }
            }
        }
    }

    /// Removes points seen by fewer than `min_observers` keyframes after at
    /// least `min_lba` local adjustments. Returns the number removed.
    pub fn cull_points(&mut self, min_observers: usize, min_lba: u32) -> usize {
        let doomed: Vec<u64> = self
            .points
            .values()
            .filter(|p| p.lba_count >= min_lba && p.observers.len() < min_observers)
            .map(|p| p.id)
            .collect();
        for &id in &doomed {
            self.remove_point(id);
        }
        if !doomed.is_empty() {
            self.rebuild_covisibility();
        }
        doomed.len()
    }

    /// Merges map points that share a landmark identity into the oldest one.
    /// Returns the number of points removed.
    pub fn fuse_duplicates(&mut self) -> usize {
        let groups: Vec<Vec<u64>> = self
            .landmark_index
            .values()
            .filter(|v| v.len() > 1)
            .cloned()
            .collect();
        let mut removed = 0;
        for group in groups {
            let keep = group[0];
            for &dup in &group[1..] {
                let Some(p) = self.points.get(&dup).cloned() else {
                    continue;
                };
                for kf in &p.observers {
                    let Some(k) = self.keyframes.get_mut(kf) else {
                        continue;
                    };
                    let already = k.observations.iter().any(|o| o.point == keep);
                    if already {
                        k.observations.retain(|o| o.point != dup);
                    } else {
                        for o in &mut k.observations {
                            if o.point == dup {
                                o.point = keep;
                            }
                        }
                    }
                }
                let observers = p.observers.clone();
                if let Some(target) = self.points.get_mut(&keep) {
                    target.observers.extend(observers);
                }
                self.points.remove(&dup);
                removed += 1;
            }
            self.landmark_index.insert(group_landmark(&self.points, keep), vec![keep]);
        }
        if removed > 0 {
            self.rebuild_covisibility();
        }
        removed
    }

    /// Recomputes every covisibility count from point observers.
    pub fn rebuild_covisibility(&mut self) {
        for kf in self.keyframes.values_mut() {
            kf.covisibility.clear();
        }
        let mut counts: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        for p in self.points.values() {
            let obs: Vec<u64> = p.observers.iter().copied().collect();
            for (i, &a) in obs.iter().enumerate() {
                for &b in &obs[i + 1..] {
                    *counts.entry((a, b)).or_default() += 1;
                }
            }
        }
        for ((a, b), c) in counts {
            if let Some(k) = self.keyframes.get_mut(&a) {
                k.covisibility.insert(b, c);
            }
            if let Some(k) = self.keyframes.get_mut(&b) {
                k.covisibility.insert(a, c);
            }
        }
    }

    /// Covisible keyframes of `id` sorted by decreasing weight, ties by id.
    pub fn covisible(&self, id: u64, limit: usize) -> Vec<u64> {
        let Some(kf) = self.keyframes.get(&id) else {
            return Vec::new();
        };
        let mut v: Vec<(u64, usize)> = kf.covisibility.iter().map(|(&k, &c)| (k, c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v.into_iter().take(limit).map(|(k, _)| k).collect()
    }

    pub fn dr_edge_into(&self, to: u64) -> Option<&DrEdge> {
        self.dr_edges.iter().find(|e| e.to == to)
    }

    pub(crate) fn restore_index(&mut self) {
        self.landmark_index.clear();
        for p in self.points.values() {
            self.landmark_index.entry(p.landmark).or_default().push(p.id);
        }
    }

    /// True when covisibility is symmetric and matches the point observers.
    pub fn covisibility_consistent(&self) -> bool {
        let mut copy = self.clone();
        copy.rebuild_covisibility();
        copy.keyframes
            .values()
            .zip(self.keyframes.values())
            .all(|(a, b)| a.covisibility == b.covisibility)
    }
}

fn group_landmark(points: &BTreeMap<u64, MapPoint>, id: u64) -> u64 {
    points[&id].landmark
}
