use std::fmt;

use nalgebra::Vector6;

use super::linear::{min_pose_eigenvalue, schur_solve, Step};
use super::normal::{build_normal_equations, NormalEquations};
use super::problem::Problem;
use crate::error::SolverError;

const MAX_RETRIES: usize = 10;
const COST_FLOOR: f64 = 1e-28;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    /// Relative cost decrease below which the solve stops.
    pub cost_tolerance: f64,
    /// Step norm, relative to the state norm, below which the solve stops.
    pub step_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            initial_damping: 1e-4,
            damping_up: 10.0,
            damping_down: 0.5,
            cost_tolerance: 1e-8,
            step_tolerance: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn motion_only() -> Self {
        Self {
            max_iterations: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let ok = self.max_iterations > 0
            && self.initial_damping > 0.0
            && self.damping_up > 1.0
            && self.damping_down > 0.0
            && self.damping_down < 1.0
            && self.cost_tolerance > 0.0
            && self.cost_tolerance < 1.0
            && self.step_tolerance > 0.0
            && self.step_tolerance < 1.0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidProblem(format!(
                "invalid solver config {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    NoFreeVariables,
    CostTolerance,
    StepTolerance,
    MaxIterations,
    /// Every damping retry increased the cost after at least one accepted step.
    NoImprovement,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::NoFreeVariables => "no_free_variables",
            Termination::CostTolerance => "cost_tolerance",
            Termination::StepTolerance => "step_tolerance",
            Termination::MaxIterations => "max_iterations",
            Termination::NoImprovement => "no_improvement",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub termination: Termination,
    /// Smallest eigenvalue of the undamped pose-pose Hessian at the solution.
    pub min_pose_eigenvalue: f64,
    pub inactive_factors: usize,
}

fn apply_step(problem: &mut Problem, ne: &NormalEquations, step: &Step) {
    for (i, p) in problem.poses.iter_mut().enumerate() {
        if let Some(b) = ne.pose_index[i] {
            let d: Vector6<f64> = step.poses.fixed_rows::<6>(6 * b).into_owned();
            p.pose = p.pose.retract(&d);
        }
    }
    for (i, l) in problem.landmarks.iter_mut().enumerate() {
        if let Some(b) = ne.landmark_index[i] {
            l.position += step.landmarks[b];
        }
    }
}

/// Levenberg-Marquardt over all free variables of `problem`, updated in place.
///
/// Accepted steps strictly decrease the robustified cost.
pub fn optimize(problem: &mut Problem, config: &SolverConfig) -> Result<SolverReport, SolverError> {
    config.validate()?;
    problem.validate()?;
    let mut ne = build_normal_equations(problem);
    let initial_cost = ne.cost;
    if ne.dim() == 0 {
        return Ok(SolverReport {
            iterations: 0,
            initial_cost,
            final_cost: initial_cost,
            termination: Termination::NoFreeVariables,
            min_pose_eigenvalue: f64::INFINITY,
            inactive_factors: ne.inactive,
        });
    }

    let mut cost = ne.cost;
    let mut lambda = config.initial_damping;
    let mut accepted_any = false;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut stale = false;

    'outer: while iterations < config.max_iterations {
        iterations += 1;
        if cost <= COST_FLOOR {
            termination = Termination::CostTolerance;
            break;
        }
        let mut accepted = false;
        for _ in 0..MAX_RETRIES {
            let damped = ne.damped(lambda);
            let step = match schur_solve(&damped) {
                Ok(s) => s,
                Err(SolverError::SingularSystem) => {
                    lambda *= config.damping_up;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let predicted = 2.0 * ne_dot(&ne, &step) - quad(&ne, &step);
            if predicted <= config.cost_tolerance * cost {
                termination = Termination::CostTolerance;
                break 'outer;
            }
            if step.norm() <= config.step_tolerance * (problem.state_norm() + config.step_tolerance)
            {
                termination = Termination::StepTolerance;
                break 'outer;
            }
            let mut candidate = problem.clone();
            apply_step(&mut candidate, &ne, &step);
            let new_cost = candidate.cost();
            if new_cost.is_finite() && new_cost < cost {
                let rel = (cost - new_cost) / cost;
                *problem = candidate;
                cost = new_cost;
                lambda = (lambda * config.damping_down).max(1e-12);
                accepted = true;
                accepted_any = true;
                if rel < config.cost_tolerance {
                    termination = Termination::CostTolerance;
                    stale = true;
                    break 'outer;
                }
                break;
            }
            lambda *= config.damping_up;
        }
        if !accepted {
            if !accepted_any {
                return Err(SolverError::Diverged { cost });
            }
            termination = Termination::NoImprovement;
            break;
        }
        ne = build_normal_equations(problem);
        cost = ne.cost;
    }

    let final_ne = if stale {
        build_normal_equations(problem)
    } else {
        ne
    };
    Ok(SolverReport {
        iterations,
        initial_cost,
        final_cost: final_ne.cost,
        termination,
        min_pose_eigenvalue: min_pose_eigenvalue(&final_ne.hpp),
        inactive_factors: final_ne.inactive,
    })
}

/// `b^T x` over the full system.
fn ne_dot(ne: &NormalEquations, step: &Step) -> f64 {
    let mut d = ne.bp.dot(&step.poses);
    for (l, b) in ne.bl.iter().enumerate() {
        d += b.dot(&step.landmarks[l]);
    }
    d
}

/// `x^T H x` over the full system.
fn quad(ne: &NormalEquations, step: &Step) -> f64 {
    let hp = &ne.hpp * &step.poses;
    let mut q = step.poses.dot(&hp);
    for (l, h) in ne.hll.iter().enumerate() {
        let x = step.landmarks[l];
        q += x.dot(&(h * x));
        for (p, w) in &ne.hpl[l] {
            q += 2.0 * step.poses.fixed_rows::<6>(6 * p).dot(&(w * x));
        }
    }
    q
}
