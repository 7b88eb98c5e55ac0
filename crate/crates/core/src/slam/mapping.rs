use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Vector2, Vector3};

use super::map::{DrEdge, KeyFrame, KfObservation, SlamMap};
use super::{Mode, SlamConfig};
use crate::factors::{DepthFactor, DrFactor, ReprojectionFactor};
use crate::optimizer::{solve_local_ba, Problem, SolverReport};
use crate::quality::{dr_weight, keyframe_quality, smooth_window_weights};
use crate::se3::Pose;

/// Unmatched landmark detection turned into a map point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewPoint {
    pub landmark: u64,
    pub pixel: Vector2<f64>,
    pub position: Vector3<f64>,
    pub depth: Option<f64>,
}

/// A tracked frame promoted to keyframe.
#[derive(Debug, Clone, PartialEq)]
pub struct NewKeyFrame {
    pub frame_id: u64,
    pub timestamp: f64,
    pub pose: Pose,
    pub quality: f64,
    /// Observations of existing map points.
    pub matches: Vec<KfObservation>,
    pub new_points: Vec<NewPoint>,
    /// Composed DR increments since the previous keyframe.
    pub dr_from_last: Option<Pose>,
}

fn initial_alpha(config: &SlamConfig) -> f64 {
    if config.mode == Mode::FixedDr {
        config.fixed_alpha
    } else {
        config.bounds.alpha_min
    }
}

/// Adds the keyframe and its new points, links it to the previous keyframe
/// by a DR edge and refreshes the reference connection count.
pub fn insert_keyframe(map: &mut SlamMap, new: NewKeyFrame, config: &SlamConfig) -> u64 {
    let prev = map.last_keyframe().map(|k| k.id);
    let mut observations = new.matches.clone();
    for n in &new.new_points {
        let point = map.add_point(n.landmark, n.position);
        observations.push(KfObservation {
            point,
            pixel: n.pixel,
            depth: n.depth,
        });
    }
    let alpha = initial_alpha(config);
    let tracked_points = observations.len();
    let id = map.add_keyframe(KeyFrame {
        id: 0,
        frame_id: new.frame_id,
        timestamp: new.timestamp,
        pose: new.pose,
        observations,
        covisibility: BTreeMap::new(),
        lba_alpha: alpha,
        quality: new.quality,
        tracked_points,
    });
    if let (Some(from), Some(delta)) = (prev, new.dr_from_last) {
        map.dr_edges.push(DrEdge {
            from,
            to: id,
            delta,
            alpha,
        });
    }

    let window = map.c_ref.window();
    let ids: Vec<u64> = map.keyframes.keys().copied().collect();
    let start = ids.len().saturating_sub(window);
    let recent: Vec<(f64, f64)> = ids[start..]
        .iter()
        .map(|&k| {
            let kf = &map.keyframes[&k];
            let c = map
                .dr_edge_into(k)
                .map_or(0, |e| kf.connection_count(e.from));
            (kf.quality, c as f64)
        })
        .collect();
    map.c_ref.update(&recent);
    id
}

/// Keyframes refined by local BA around `kf`: itself, its strongest
/// covisible neighbours and its temporal predecessors.
fn local_window(map: &SlamMap, kf: u64, config: &SlamConfig) -> BTreeSet<u64> {
    let mut window: BTreeSet<u64> = BTreeSet::new();
    window.insert(kf);
    window.extend(map.covisible(kf, config.covisible_limit));
    let mut cur = kf;
    for _ in 0..config.smoothing_half_width {
        match map.dr_edge_into(cur) {
            Some(e) => {
                window.insert(e.from);
                cur = e.from;
            }
            None => break,
        }
    }
    window
}

/// Recomputes DR edge weights inside the window from keyframe connectivity
/// and spreads them over temporally adjacent keyframes.
fn update_edge_weights(map: &mut SlamMap, window: &BTreeSet<u64>, config: &SlamConfig) {
    let bounds = config.effective_bounds();
    let mut raw: Vec<(u64, f64)> = Vec::new();
    for &k in window {
        let Some(e) = map.dr_edge_into(k) else {
            continue;
        };
        let alpha = match config.mode {
            Mode::Adaptive => {
                let c = map.keyframes[&k].connection_count(e.from) as f64;
                dr_weight(keyframe_quality(c, map.c_ref.value()), &bounds)
            }
            _ => config.fixed_alpha,
        };
        raw.push((k, alpha));
    }
    let mut smoothed: Vec<(u64, f64)> = Vec::with_capacity(raw.len());
    let mut run: Vec<(u64, f64)> = Vec::new();
    for &(k, a) in &raw {
        if let Some(&(last, _)) = run.last() {
            if k != last + 1 {
                smoothed.extend(smooth_window_weights(&run, config.smoothing_half_width));
                run.clear();
            }
        }
        run.push((k, a));
    }
    smoothed.extend(smooth_window_weights(&run, config.smoothing_half_width));
    for (k, a) in smoothed {
        let a = a.clamp(bounds.alpha_min, bounds.alpha_max);
        if let Some(e) = map.dr_edges.iter_mut().find(|e| e.to == k) {
            e.alpha = a;
        }
        if let Some(kf) = map.keyframes.get_mut(&k) {
            kf.lba_alpha = a;
        }
    }
}

pub(crate) struct BuiltProblem {
    pub problem: Problem,
    pub pose_ids: Vec<u64>,
    pub point_ids: Vec<u64>,
}

/// Assembles a BA problem over `free` keyframes; `fixed` keyframes and the
/// DR predecessors of free keyframes join as anchors.
pub(crate) fn build_problem(
    map: &SlamMap,
    free: &BTreeSet<u64>,
    fixed: &BTreeSet<u64>,
    config: &SlamConfig,
    with_loops: bool,
) -> BuiltProblem {
    let mut problem = Problem::new();
    let mut pose_index: BTreeMap<u64, usize> = BTreeMap::new();
    let mut pose_ids = Vec::new();
    let mut add_pose = |problem: &mut Problem, id: u64, is_fixed: bool| {
        let idx = problem.add_pose(id, map.keyframes[&id].pose, is_fixed);
        pose_index.insert(id, idx);
        pose_ids.push(id);
    };
    let mut all: BTreeSet<u64> = free.clone();
    all.extend(fixed.iter().copied());
    let use_dr = config.mode.uses_dr_factors();
    let mut anchors: BTreeSet<u64> = fixed.clone();
    if use_dr {
        for &k in free {
            if let Some(e) = map.dr_edge_into(k) {
                if !all.contains(&e.from) {
                    anchors.insert(e.from);
                }
            }
        }
    }
    for &id in &all.union(&anchors).copied().collect::<BTreeSet<u64>>() {
        let is_fixed = !free.contains(&id);
        add_pose(&mut problem, id, is_fixed);
    }

    let local_points: BTreeSet<u64> = free
        .iter()
        .flat_map(|k| map.keyframes[k].observations.iter().map(|o| o.point))
        .collect();
    let mut point_ids = Vec::new();
    let mut point_index: BTreeMap<u64, usize> = BTreeMap::new();
    let use_depth = config.depth_noise > 0.0;
    for &pid in &local_points {
        let p = &map.points[&pid];
        let seen_by = p.observers.iter().filter(|k| pose_index.contains_key(k)).count();
        let ranged = use_depth
            && p.observers.iter().any(|k| {
                pose_index.contains_key(k)
                    && map.keyframes[k]
                        .observations
                        .iter()
                        .any(|o| o.point == pid && o.depth.is_some())
            });
        let l = problem.add_landmark(pid, p.position, seen_by < 2 && !ranged);
        point_index.insert(pid, l);
        point_ids.push(pid);
    }
    let threshold = config.huber_threshold();
    for (&k, &pi) in &pose_index {
        for o in &map.keyframes[&k].observations {
            let Some(&l) = point_index.get(&o.point) else {
                continue;
            };
            if let Ok(f) = ReprojectionFactor::with_threshold(
                pi,
                l,
                o.pixel,
                config.pixel_std,
                threshold,
                map.camera,
            ) {
                let _ = problem.add_reprojection(f);
            }
            if let Some(d) = o.depth.filter(|_| use_depth) {
                if let Ok(f) = DepthFactor::quadratic(pi, l, d, config.depth_noise) {
                    let _ = problem.add_depth(f);
                }
            }
        }
    }

    if use_dr {
        let bounds = config.effective_bounds();
        for e in &map.dr_edges {
            let (Some(&a), Some(&b)) = (pose_index.get(&e.from), pose_index.get(&e.to)) else {
                continue;
            };
            if problem.poses[a].fixed && problem.poses[b].fixed {
                continue;
            }
            match DrFactor::weighted(a, b, e.delta, e.alpha, &config.nominal, &bounds) {
                Ok(f) => {
                    let _ = problem.add_dr(f);
                }
                Err(err) => tracing::warn!("DR edge {} -> {} skipped: {err}", e.from, e.to),
            }
        }
    }
    if with_loops {
        for e in &map.loop_edges {
            let (Some(&a), Some(&b)) = (pose_index.get(&e.from), pose_index.get(&e.to)) else {
                continue;
            };
            if let Ok(f) = DrFactor::new(a, b, e.delta, config.nominal.matrix() * e.info_scale) {
                let _ = problem.add_dr(f);
            }
        }
    }
    BuiltProblem {
        problem,
        pose_ids,
        point_ids,
    }
}

pub(crate) fn write_back(map: &mut SlamMap, built: &BuiltProblem) {
    for (i, id) in built.pose_ids.iter().enumerate() {
        let v = &built.problem.poses[i];
        if !v.fixed && v.pose.is_finite() {
            if let Some(kf) = map.keyframes.get_mut(id) {
                kf.pose = v.pose;
            }
        }
    }
    for (i, id) in built.point_ids.iter().enumerate() {
        let v = &built.problem.landmarks[i];
        if !v.fixed && v.position.iter().all(|x| x.is_finite()) {
            if let Some(p) = map.points.get_mut(id) {
                p.position = v.position;
            }
        }
    }
}

/// Local bundle adjustment triggered by keyframe `kf`, followed by culling
/// of weakly observed points. `None` when there is nothing to adjust.
pub fn local_adjustment(map: &mut SlamMap, kf: u64, config: &SlamConfig) -> Option<SolverReport> {
    let window = local_window(map, kf, config);
    if config.mode.uses_dr_factors() {
        update_edge_weights(map, &window, config);
    }
    if window.len() < 2 {
        return None;
    }
    let oldest = *window.iter().next().unwrap();
    let mut free: BTreeSet<u64> = window.clone();
    free.remove(&oldest);
    let mut fixed: BTreeSet<u64> = BTreeSet::new();
    fixed.insert(oldest);
    for &k in &window {
        for o in &map.keyframes[&k].observations {
            for &obs in &map.points[&o.point].observers {
                if !window.contains(&obs) {
                    fixed.insert(obs);
                }
            }
        }
    }
    if !config.mode.uses_dr_factors() {
        let bare: Vec<u64> = free
            .iter()
            .copied()
            .filter(|k| map.keyframes[k].observations.is_empty())
            .collect();
        for k in bare {
            free.remove(&k);
            fixed.insert(k);
        }
    }
    if free.is_empty() {
        return None;
    }

    let mut built = build_problem(map, &free, &fixed, config, false);
    let report = match solve_local_ba(&mut built.problem, &config.solver) {
        Ok(r) => r,
        Err(e) => {
            tracing::debug!("local BA at keyframe {kf} failed: {e}");
            return None;
        }
    };
    write_back(map, &built);
    for id in &built.point_ids {
        if let Some(p) = map.points.get_mut(id) {
            p.lba_count += 1;
        }
    }
    map.cull_points(2, 2);
    Some(report)
}
