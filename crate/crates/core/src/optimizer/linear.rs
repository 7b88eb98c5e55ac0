use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use super::normal::NormalEquations;
use crate::error::SolverError;

/// Solution of the normal equations split into pose and landmark parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub poses: DVector<f64>,
    pub landmarks: Vec<Vector3<f64>>,
}

impl Step {
    pub fn to_vector(&self) -> DVector<f64> {
        let np = self.poses.len();
        let mut v = DVector::zeros(np + 3 * self.landmarks.len());
        v.rows_mut(0, np).copy_from(&self.poses);
        for (i, l) in self.landmarks.iter().enumerate() {
            v.fixed_rows_mut::<3>(np + 3 * i).copy_from(l);
        }
        v
    }

    pub fn norm(&self) -> f64 {
        let l: f64 = self.landmarks.iter().map(|l| l.norm_squared()).sum();
        (self.poses.norm_squared() + l).sqrt()
    }
}

/// Eliminates the landmark blocks and solves the reduced camera system.
///
/// `S = H_pp - sum_l H_pl H_ll^-1 H_lp` is solved by Cholesky, then each
/// landmark step is back-substituted independently.
pub fn schur_solve(ne: &NormalEquations) -> Result<Step, SolverError> {
    let mut s = ne.hpp.clone();
    let mut rhs = ne.bp.clone();
    let mut hll_inv = Vec::with_capacity(ne.hll.len());
    for (l, h) in ne.hll.iter().enumerate() {
        let inv: Matrix3<f64> = Cholesky::new(*h)
            .ok_or(SolverError::SingularSystem)?
            .inverse();
        let blocks = &ne.hpl[l];
        for (i, wi) in blocks {
            let wi_inv = wi * inv;
            let mut r = rhs.fixed_rows_mut::<6>(6 * i);
            r -= wi_inv * ne.bl[l];
            for (j, wj) in blocks {
                let mut blk = s.fixed_view_mut::<6, 6>(6 * i, 6 * j);
                blk -= wi_inv * wj.transpose();
            }
        }
        hll_inv.push(inv);
    }
    let poses = if s.nrows() == 0 {
        DVector::zeros(0)
    } else {
        symmetrize(&mut s);
        Cholesky::new(s)
            .ok_or(SolverError::SingularSystem)?
            .solve(&rhs)
    };
    if poses.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::SingularSystem);
    }
    let landmarks = hll_inv
        .iter()
        .enumerate()
        .map(|(l, inv)| {
            let mut r = ne.bl[l];
            for (i, w) in &ne.hpl[l] {
                r -= w.transpose() * poses.fixed_rows::<6>(6 * i);
            }
            inv * r
        })
        .collect();
    Ok(Step { poses, landmarks })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Solves the assembled system with a dense Cholesky factorization.
pub fn dense_solve(ne: &NormalEquations) -> Result<Step, SolverError> {
    let (h, b) = ne.to_dense();
    let x = if h.nrows() == 0 {
        DVector::zeros(0)
    } else {
        Cholesky::new(h)
            .ok_or(SolverError::SingularSystem)?
            .solve(&b)
    };
    let np = ne.hpp.nrows();
    let landmarks = (0..ne.hll.len())
        .map(|l| x.fixed_rows::<3>(np + 3 * l).into_owned())
        .collect();
    Ok(Step {
        poses: x.rows(0, np).into_owned(),
        landmarks,
    })
}

/// Smallest eigenvalue of a symmetric pose-pose block; `+inf` for an empty block.
pub fn min_pose_eigenvalue(hpp: &DMatrix<f64>) -> f64 {
    if hpp.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(hpp.clone()).eigenvalues.min()
}
