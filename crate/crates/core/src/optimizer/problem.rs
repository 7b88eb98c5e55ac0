use nalgebra::Vector3;

use crate::error::SolverError;
use crate::factors::{
    depth_residual, dr_residual, huber_cost, reprojection_residual, DepthFactor, DrFactor,
    ReprojectionFactor,
};
use crate::se3::Pose;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseVariable {
    pub id: u64,
    pub pose: Pose,
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkVariable {
    pub id: u64,
    pub position: Vector3<f64>,
    pub fixed: bool,
}

/// Pose and landmark variables tied together by reprojection, depth and DR factors.
///
/// Factors reference variables by their index in this problem.
#[derive(Debug, Clone, Default)]
pub struct Problem {
    pub poses: Vec<PoseVariable>,
    pub landmarks: Vec<LandmarkVariable>,
    pub reprojection: Vec<ReprojectionFactor>,
    pub depth: Vec<DepthFactor>,
    pub dr: Vec<DrFactor>,
}

/// Cost of a problem split by factor type, with inactive counts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub visual: f64,
    pub dr: f64,
    pub inactive_visual: usize,
    pub inactive_dr: usize,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.visual + self.dr
    }
}

impl Problem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_pose(&mut self, id: u64, pose: Pose, fixed: bool) -> usize {
        self.poses.push(PoseVariable { id, pose, fixed });
        self.poses.len() - 1
    }

    pub fn add_landmark(&mut self, id: u64, position: Vector3<f64>, fixed: bool) -> usize {
        self.landmarks.push(LandmarkVariable {
            id,
            position,
            fixed,
        });
        self.landmarks.len() - 1
    }

    pub fn add_reprojection(&mut self, factor: ReprojectionFactor) -> Result<(), SolverError> {
        if factor.pose >= self.poses.len() || factor.landmark >= self.landmarks.len() {
            return Err(SolverError::InvalidProblem(format!(
                "reprojection factor references pose {} / landmark {} that do not exist",
                factor.pose, factor.landmark
            )));
        }
        self.reprojection.push(factor);
        Ok(())
    }

    pub fn add_depth(&mut self, factor: DepthFactor) -> Result<(), SolverError> {
        if factor.pose >= self.poses.len() || factor.landmark >= self.landmarks.len() {
            return Err(SolverError::InvalidProblem(format!(
                "depth factor references pose {} / landmark {} that do not exist",
                factor.pose, factor.landmark
            )));
        }
        self.depth.push(factor);
        Ok(())
    }

    pub fn add_dr(&mut self, factor: DrFactor) -> Result<(), SolverError> {
        if factor.from >= self.poses.len() || factor.to >= self.poses.len() || factor.from == factor.to
        {
            return Err(SolverError::InvalidProblem(format!(
                "DR factor {} -> {} references invalid poses",
                factor.from, factor.to
            )));
        }
        self.dr.push(factor);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        for f in &self.reprojection {
            if f.pose >= self.poses.len() || f.landmark >= self.landmarks.len() {
                return Err(SolverError::InvalidProblem(
                    "reprojection factor references a missing variable".into(),
                ));
            }
        }
        for f in &self.depth {
            if f.pose >= self.poses.len() || f.landmark >= self.landmarks.len() {
                return Err(SolverError::InvalidProblem(
                    "depth factor references a missing variable".into(),
                ));
            }
        }
        for f in &self.dr {
            if f.from >= self.poses.len() || f.to >= self.poses.len() {
                return Err(SolverError::InvalidProblem(
                    "DR factor references a missing pose".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn free_pose_count(&self) -> usize {
        self.poses.iter().filter(|p| !p.fixed).count()
    }

    pub fn free_landmark_count(&self) -> usize {
        self.landmarks.iter().filter(|l| !l.fixed).count()
    }

    pub fn cost_breakdown(&self) -> CostBreakdown {
        let mut c = CostBreakdown::default();
        for f in &self.reprojection {
            match reprojection_residual(
                f,
                &self.poses[f.pose].pose,
                &self.landmarks[f.landmark].position,
            ) {
                Ok(lin) => {
                    let e = lin.residual.norm() / f.pixel_std;
                    c.visual += huber_cost(e, f.huber_threshold / f.pixel_std);
                }
                Err(_) => c.inactive_visual += 1,
            }
        }
        for f in &self.depth {
            match depth_residual(f, &self.poses[f.pose].pose, &self.landmarks[f.landmark].position) {
                Ok(lin) => c.visual += lin.residual * lin.residual * f.information(),
                Err(_) => c.inactive_visual += 1,
            }
        }
        for f in &self.dr {
            match dr_residual(f, &self.poses[f.from].pose, &self.poses[f.to].pose) {
                Ok(lin) => c.dr += lin.residual.mahalanobis(&f.information),
                Err(_) => c.inactive_dr += 1,
            }
        }
        c
    }

    /// Robustified total cost: Huber on reprojection terms, plain squares elsewhere.
    pub fn cost(&self) -> f64 {
        self.cost_breakdown().total()
    }

    /// Norm of all free parameters, used to scale the step tolerance.
    pub(crate) fn state_norm(&self) -> f64 {
        let p: f64 = self
            .poses
            .iter()
            .filter(|p| !p.fixed)
            .map(|p| p.pose.translation().norm_squared() + 1.0)
            .sum();
        let l: f64 = self
            .landmarks
            .iter()
            .filter(|l| !l.fixed)
            .map(|l| l.position.norm_squared())
            .sum();
        (p + l).sqrt()
    }
}
