use std::collections::{BTreeMap, BTreeSet};

use super::map::{LoopEdge, SlamMap};
use super::mapping::{build_problem, write_back};
use super::SlamConfig;
use crate::error::SolverError;
use crate::optimizer::{solve_global_ba, SolverReport};
use crate::se3::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopCandidate {
    /// Older keyframe being revisited.
    pub from: u64,
    /// Keyframe that closes the loop.
    pub to: u64,
    /// Ground-truth relative pose from `from` to `to`.
    pub delta: Pose,
}

/// Geometric stand-in for place recognition.
///
/// Fires when the ground-truth position of keyframe `kf` lies within the
/// loop radius of a keyframe at least `loop_gap_min` keyframes older and no
/// loop closed within the last `loop_gap_min` keyframes. The closest such
/// keyframe is chosen.
pub fn detect_loop_oracle(
    map: &SlamMap,
    kf: u64,
    gt: &BTreeMap<u64, Pose>,
    last_loop: Option<u64>,
    config: &SlamConfig,
) -> Option<LoopCandidate> {
    let gap = config.loop_gap_min as u64;
    if let Some(l) = last_loop {
        if kf < l + gap {
            return None;
        }
    }
    let here = gt.get(&kf)?;
    map.keyframes.get(&kf)?;
    let mut best: Option<(f64, u64)> = None;
    for &j in map.keyframes.keys() {
        if j + gap > kf {
            break;
        }
        let Some(there) = gt.get(&j) else { continue };
        let d = (here.translation() - there.translation()).norm();
        if d < config.loop_radius && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, j));
        }
    }
    best.map(|(_, j)| LoopCandidate {
        from: j,
        to: kf,
        delta: gt[&j].inverse().compose(here),
    })
}

/// Global bundle adjustment over every keyframe with the first one fixed.
/// DR edges keep the weights of their last local adjustment.
pub fn global_adjustment(map: &mut SlamMap, config: &SlamConfig) -> Result<SolverReport, SolverError> {
    let mut ids = map.keyframes.keys().copied();
    let Some(first) = ids.next() else {
        return Err(SolverError::InvalidProblem("map has no keyframes".into()));
    };
    let mut free: BTreeSet<u64> = ids.collect();
    let mut fixed: BTreeSet<u64> = [first].into_iter().collect();
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
    let mut built = build_problem(map, &free, &fixed, config, true);
    let report = solve_global_ba(&mut built.problem, &config.solver)?;
    write_back(map, &built);
    Ok(report)
}

pub(crate) fn add_loop_edge(map: &mut SlamMap, c: &LoopCandidate, config: &SlamConfig) {
    map.loop_edges.push(LoopEdge {
        from: c.from,
        to: c.to,
        delta: c.delta,
        info_scale: config.loop_info_scale,
    });
}
