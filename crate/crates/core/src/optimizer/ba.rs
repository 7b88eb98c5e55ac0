use super::lm::{optimize, SolverConfig, SolverReport};
use super::problem::Problem;
use crate::error::{FactorError, SolverError};
use crate::factors::DrFactor;
use crate::quality::{dr_weight, NominalDrInformation, WeightBounds};
use crate::se3::Pose;

/// DR factor whose weight follows the tracking quality of the `to` frame.
pub fn adaptive_dr_factor(
    from: usize,
    to: usize,
    delta: Pose,
    quality: f64,
    bounds: &WeightBounds,
    nominal: &NominalDrInformation,
) -> Result<(DrFactor, f64), FactorError> {
    let alpha = dr_weight(quality, bounds);
    Ok((DrFactor::weighted(from, to, delta, alpha, nominal, bounds)?, alpha))
}

/// Refines the single free pose of `problem` against fixed landmarks and
/// fixed neighbouring poses.
pub fn solve_motion_only(
    problem: &mut Problem,
    config: &SolverConfig,
) -> Result<SolverReport, SolverError> {
    let free: Vec<usize> = (0..problem.poses.len())
        .filter(|&i| !problem.poses[i].fixed)
        .collect();
    if free.len() != 1 {
        return Err(SolverError::InvalidProblem(format!(
            "motion-only solve needs exactly one free pose, found {}",
            free.len()
        )));
    }
    if problem.landmarks.iter().any(|l| !l.fixed) {
        return Err(SolverError::InvalidProblem(
            "motion-only solve requires fixed landmarks".into(),
        ));
    }
    let p = free[0];
    let visual = problem.reprojection.iter().any(|f| f.pose == p)
        || problem.depth.iter().any(|f| f.pose == p);
    let dr = problem.dr.iter().any(|f| f.from == p || f.to == p);
    if !visual && !dr {
        return Err(SolverError::NoConstraints);
    }
    optimize(problem, config)
}

/// Bundle adjustment over a local keyframe window; out-of-window keyframes
/// must already be marked fixed.
pub fn solve_local_ba(
    problem: &mut Problem,
    config: &SolverConfig,
) -> Result<SolverReport, SolverError> {
    if problem.poses.len() < 2 {
        return Err(SolverError::InvalidProblem(
            "local BA window needs at least two keyframes".into(),
        ));
    }
    check_gauge(problem)?;
    optimize(problem, config)
}

/// Bundle adjustment over the whole map, DR edges keeping their stored weights.
pub fn solve_global_ba(
    problem: &mut Problem,
    config: &SolverConfig,
) -> Result<SolverReport, SolverError> {
    check_gauge(problem)?;
    optimize(problem, config)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Every free pose must reach a fixed pose or a fixed landmark through DR
/// edges or shared landmarks.
pub fn check_gauge(problem: &Problem) -> Result<(), SolverError> {
    let np = problem.poses.len();
    let nl = problem.landmarks.len();
    // Poses occupy [0, np), landmarks [np, np + nl).
    let mut uf = UnionFind::new(np + nl);
    for f in &problem.dr {
        uf.union(f.from, f.to);
    }
    for f in &problem.reprojection {
        uf.union(f.pose, np + f.landmark);
    }
    for f in &problem.depth {
        uf.union(f.pose, np + f.landmark);
    }
    let mut anchored = vec![false; np + nl];
    for (i, p) in problem.poses.iter().enumerate() {
        if p.fixed {
            let r = uf.find(i);
            anchored[r] = true;
        }
    }
    for (i, l) in problem.landmarks.iter().enumerate() {
        if l.fixed {
            let r = uf.find(np + i);
            anchored[r] = true;
        }
    }
    for (i, p) in problem.poses.iter().enumerate() {
        if !p.fixed && !anchored[uf.find(i)] {
            return Err(SolverError::GaugeUnderconstrained { pose: i });
        }
    }
    Ok(())
}
