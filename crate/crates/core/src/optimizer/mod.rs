//! Levenberg-Marquardt bundle adjustment over poses and landmarks.
//!
//! Poses are perturbed on the right (`T * exp(d)`), landmarks additively.
//! Landmarks are eliminated with a Schur complement before the pose solve.

mod ba;
mod linear;
mod lm;
mod normal;
mod problem;

pub use ba::{
    adaptive_dr_factor, check_gauge, solve_global_ba, solve_local_ba, solve_motion_only,
};
pub use linear::{dense_solve, min_pose_eigenvalue, schur_solve, Step};
pub use lm::{optimize, SolverConfig, SolverReport, Termination};
pub use normal::{build_normal_equations, NormalEquations};
pub use problem::{CostBreakdown, LandmarkVariable, PoseVariable, Problem};
