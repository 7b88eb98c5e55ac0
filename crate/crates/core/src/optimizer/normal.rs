//! Gauss-Newton normal equations with the pose/landmark block structure kept
//! explicit: a dense pose-pose block, 3x3 landmark blocks on the diagonal,
//! and sparse pose-landmark coupling blocks.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Matrix6x3, Vector3};

use super::problem::Problem;
use crate::factors::{
    depth_residual, dr_residual, huber_cost, huber_weight, reprojection_residual, SqrtInformation,
};

#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    /// Block index of each problem pose, `None` when fixed.
    pub pose_index: Vec<Option<usize>>,
    /// Block index of each problem landmark, `None` when fixed.
    pub landmark_index: Vec<Option<usize>>,
    pub hpp: DMatrix<f64>,
    pub bp: DVector<f64>,
    pub hll: Vec<Matrix3<f64>>,
    pub bl: Vec<Vector3<f64>>,
    /// Coupling blocks per free landmark as `(pose block, H_pl block)`.
    pub hpl: Vec<Vec<(usize, Matrix6x3<f64>)>>,
    /// Robustified cost at the linearization point.
    pub cost: f64,
    pub inactive: usize,
}

impl NormalEquations {
    pub fn pose_blocks(&self) -> usize {
        self.hpp.nrows() / 6
    }

    pub fn landmark_blocks(&self) -> usize {
        self.hll.len()
    }

    pub fn dim(&self) -> usize {
        self.hpp.nrows() + 3 * self.hll.len()
    }

    /// Assembles the full dense system `(H, b)`, poses first.
    pub fn to_dense(&self) -> (DMatrix<f64>, DVector<f64>) {
        let np = self.hpp.nrows();
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        h.view_mut((0, 0), (np, np)).copy_from(&self.hpp);
        b.rows_mut(0, np).copy_from(&self.bp);
        for (l, hll) in self.hll.iter().enumerate() {
            let o = np + 3 * l;
            h.fixed_view_mut::<3, 3>(o, o).copy_from(hll);
            b.fixed_rows_mut::<3>(o).copy_from(&self.bl[l]);
            for (p, w) in &self.hpl[l] {
                h.fixed_view_mut::<6, 3>(6 * p, o).copy_from(w);
                h.fixed_view_mut::<3, 6>(o, 6 * p).copy_from(&w.transpose());
            }
        }
        (h, b)
    }

    /// Levenberg-Marquardt damping on the diagonal: `H_ii += lambda * max(H_ii, floor)`,
    /// where the floor keeps empty directions regularized.
    pub fn damped(&self, lambda: f64) -> NormalEquations {
        let mut out = self.clone();
        let mut max_diag: f64 = 0.0;
        for i in 0..self.hpp.nrows() {
            max_diag = max_diag.max(self.hpp[(i, i)]);
        }
        for h in &self.hll {
            for i in 0..3 {
                max_diag = max_diag.max(h[(i, i)]);
            }
        }
        let floor = (1e-6 * max_diag).max(1e-9);
        for i in 0..out.hpp.nrows() {
            let d = out.hpp[(i, i)];
            out.hpp[(i, i)] = d + lambda * d.max(floor);
        }
        for h in &mut out.hll {
            for i in 0..3 {
                let d = h[(i, i)];
                h[(i, i)] = d + lambda * d.max(floor);
            }
        }
        out
    }
}

/// Linearizes every active factor at the problem's current state.
///
/// `H = J^T W J` and `b = -J^T W r`, where `W` folds the information matrix
/// and the Huber IRLS weight of visual factors together.
pub fn build_normal_equations(problem: &Problem) -> NormalEquations {
    let mut pose_index = Vec::with_capacity(problem.poses.len());
    let mut np = 0;
    for p in &problem.poses {
        if p.fixed {
            pose_index.push(None);
        } else {
            pose_index.push(Some(np));
            np += 1;
        }
    }
    let mut landmark_index = Vec::with_capacity(problem.landmarks.len());
    let mut nl = 0;
    for l in &problem.landmarks {
        if l.fixed {
            landmark_index.push(None);
        } else {
            landmark_index.push(Some(nl));
            nl += 1;
        }
    }

    let mut hpp = DMatrix::zeros(6 * np, 6 * np);
    let mut bp = DVector::zeros(6 * np);
    let mut hll = vec![Matrix3::zeros(); nl];
    let mut bl = vec![Vector3::zeros(); nl];
    let mut hpl: Vec<Vec<(usize, Matrix6x3<f64>)>> = vec![Vec::new(); nl];
    let mut cost = 0.0;
    let mut inactive = 0;

    for f in &problem.reprojection {
        let pose = &problem.poses[f.pose].pose;
        let x = &problem.landmarks[f.landmark].position;
        let lin = match reprojection_residual(f, pose, x) {
            Ok(lin) => lin,
            Err(_) => {
                inactive += 1;
                continue;
            }
        };
        let norm = lin.residual.norm();
        let w = huber_weight(norm, f.huber_threshold) * f.information();
        cost += huber_cost(norm / f.pixel_std, f.huber_threshold / f.pixel_std);
        let pi = pose_index[f.pose];
        let li = landmark_index[f.landmark];
        if let Some(p) = pi {
            let jt = lin.j_pose.transpose();
            let mut blk = hpp.fixed_view_mut::<6, 6>(6 * p, 6 * p);
            blk += jt * lin.j_pose * w;
            let mut g = bp.fixed_rows_mut::<6>(6 * p);
            g -= jt * lin.residual * w;
        }
        if let Some(l) = li {
            let jt = lin.j_landmark.transpose();
            hll[l] += jt * lin.j_landmark * w;
            bl[l] -= jt * lin.residual * w;
            if let Some(p) = pi {
                let blk = lin.j_pose.transpose() * lin.j_landmark * w;
                match hpl[l].iter_mut().find(|(q, _)| *q == p) {
                    Some((_, existing)) => *existing += blk,
                    None => hpl[l].push((p, blk)),
                }
            }
        }
    }

    for f in &problem.depth {
        let pose = &problem.poses[f.pose].pose;
        let x = &problem.landmarks[f.landmark].position;
        let lin = match depth_residual(f, pose, x) {
            Ok(lin) => lin,
            Err(_) => {
                inactive += 1;
                continue;
            }
        };
        let w = f.information();
        cost += lin.residual * lin.residual * w;
        let pi = pose_index[f.pose];
        let li = landmark_index[f.landmark];
        if let Some(p) = pi {
            let jt = lin.j_pose.transpose();
            let mut blk = hpp.fixed_view_mut::<6, 6>(6 * p, 6 * p);
            blk += jt * lin.j_pose * w;
            let mut g = bp.fixed_rows_mut::<6>(6 * p);
            g -= jt * (lin.residual * w);
        }
        if let Some(l) = li {
            let jt = lin.j_landmark.transpose();
            hll[l] += jt * lin.j_landmark * w;
            bl[l] -= jt * (lin.residual * w);
            if let Some(p) = pi {
                let blk = lin.j_pose.transpose() * lin.j_landmark * w;
                match hpl[l].iter_mut().find(|(q, _)| *q == p) {
                    Some((_, existing)) => *existing += blk,
                    None => hpl[l].push((p, blk)),
                }
            }
        }
    }

    for f in &problem.dr {
        let lin = match dr_residual(f, &problem.poses[f.from].pose, &problem.poses[f.to].pose) {
            Ok(lin) => lin,
            Err(e) => {
                tracing::warn!("DR factor {} -> {} inactive: {e}", f.from, f.to);
                inactive += 1;
                continue;
            }
        };
        let sqrt = match SqrtInformation::<6>::new(&f.information) {
            Ok(s) => s,
            Err(_) => {
                inactive += 1;
                continue;
            }
        };
        let r = sqrt.residual(&lin.residual.to_vector());
        cost += r.norm_squared();
        let blocks: [(Option<usize>, Matrix6<f64>); 2] = [
            (pose_index[f.from], sqrt.jacobian(&lin.j_from)),
            (pose_index[f.to], sqrt.jacobian(&lin.j_to)),
        ];
        for (pa, ja) in &blocks {
            let Some(a) = pa else { continue };
            let mut g = bp.fixed_rows_mut::<6>(6 * a);
            g -= ja.transpose() * r;
            for (pb, jb) in &blocks {
                let Some(b) = pb else { continue };
                let mut blk = hpp.fixed_view_mut::<6, 6>(6 * a, 6 * b);
                blk += ja.transpose() * jb;
            }
        }
    }

    for v in &mut hpl {
        v.sort_by_key(|(p, _)| *p);
    }

    NormalEquations {
        pose_index,
        landmark_index,
        hpp,
        bp,
        hll,
        bl,
        hpl,
        cost,
        inactive,
    }
}
