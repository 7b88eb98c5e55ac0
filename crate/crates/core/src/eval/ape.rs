use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::Trajectory;
use crate::error::EvalError;
use crate::se3::Pose;

/// Completeness thresholds of the benchmark failure rule.
pub const MAX_RMSE: f64 = 10.0;
pub const MIN_TRACKING_RATIO: f64 = 0.5;

/// Keyframe RMSE below which a frame/keyframe ratio is undefined.
pub const MIN_RATIO_DENOMINATOR: f64 = 1e-12;

/// Index pairs `(est, ref)` matched by nearest timestamp.
///
/// The window is half the median sampling period of `reference`; estimate
/// samples without a reference sample inside it are dropped.
pub fn associate(est: &Trajectory, reference: &Trajectory) -> Vec<(usize, usize)> {
    let rt: Vec<f64> = reference.timestamps().collect();
    if rt.is_empty() {
        return Vec::new();
    }
    let window = if rt.len() < 2 {
        0.0
    } else {
        let mut dt: Vec<f64> = rt.windows(2).map(|w| w[1] - w[0]).collect();
        dt.sort_by(|a, b| a.total_cmp(b));
        0.5 * dt[dt.len() / 2]
    };
    let mut pairs = Vec::new();
    for (i, t) in est.timestamps().enumerate() {
        let k = rt.partition_point(|&r| r < t);
        let best = [k.checked_sub(1), (k < rt.len()).then_some(k)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (rt[a] - t).abs().total_cmp(&(rt[b] - t).abs()));
        if let Some(j) = best {
            if (rt[j] - t).abs() <= window {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

type Paired = (usize, Vector3<f64>, Vector3<f64>);

fn paired_positions(est: &Trajectory, reference: &Trajectory) -> Result<Vec<Paired>, EvalError> {
    let pairs = associate(est, reference);
    if pairs.len() < 3 {
        return Err(EvalError::TooFewPairs { pairs: pairs.len() });
    }
    let e = est.samples();
    let r = reference.samples();
    Ok(pairs
        .into_iter()
        .map(|(i, j)| (i, *e[i].1.translation(), *r[j].1.translation()))
        .collect())
}

fn rigid_fit(pairs: &[Paired]) -> Pose {
    let n = pairs.len() as f64;
    let ce = pairs.iter().map(|p| p.1).sum::<Vector3<f64>>() / n;
    let cr = pairs.iter().map(|p| p.2).sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (_, e, r) in pairs {
        h += (e - ce) * (r - cr).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rot = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let q = UnitQuaternion::from_matrix(&rot);
    let t = cr - q * ce;
    Pose::new(q, t)
}

/// Rigid transform `T` minimizing the squared distances between `T * est`
/// and `reference` positions over associated pairs. No scale.
pub fn align(est: &Trajectory, reference: &Trajectory) -> Result<Pose, EvalError> {
    Ok(rigid_fit(&paired_positions(est, reference)?))
}

/// Aligned position error of one associated estimate sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    /// Index into the estimate trajectory.
    pub index: usize,
    pub timestamp: f64,
    /// Meters.
    pub error: f64,
}

pub fn ape_errors(est: &Trajectory, reference: &Trajectory) -> Result<Vec<PoseError>, EvalError> {
    let pairs = paired_positions(est, reference)?;
    let t = rigid_fit(&pairs);
    let s = est.samples();
    Ok(pairs
        .iter()
        .map(|(i, e, r)| PoseError {
            index: *i,
            timestamp: s[*i].0,
            error: (t.transform_point(e) - r).norm(),
        })
        .collect())
}

/// Root-mean-square aligned position error.
pub fn ape_rmse(est: &Trajectory, reference: &Trajectory) -> Result<f64, EvalError> {
    let errs = ape_errors(est, reference)?;
    let ss: f64 = errs.iter().map(|e| e.error * e.error).sum();
    Ok((ss / errs.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunVerdict {
    pub rmse: f64,
    pub tracking_ratio: f64,
    pub completed: bool,
}

impl RunVerdict {
    pub fn new(rmse: f64, tracking_ratio: f64) -> Self {
        Self {
            rmse,
            tracking_ratio,
            completed: rmse <= MAX_RMSE && tracking_ratio >= MIN_TRACKING_RATIO,
        }
    }
}

/// Completeness verdict. An RMSE that cannot be computed counts as infinite.
pub fn verdict(est: &Trajectory, reference: &Trajectory, tracked: &[bool]) -> RunVerdict {
    let rmse = ape_rmse(est, reference).unwrap_or(f64::INFINITY);
    let ratio = if tracked.is_empty() {
        0.0
    } else {
        tracked.iter().filter(|&&t| t).count() as f64 / tracked.len() as f64
    };
    RunVerdict::new(rmse, ratio)
}

/// Frame RMSE over keyframe RMSE, both against `reference`.
pub fn frame_kf_ratio(frames: &Trajectory, keyframes: &Trajectory, reference: &Trajectory) -> Result<f64, EvalError> {
    let kf = ape_rmse(keyframes, reference)?;
    if kf < MIN_RATIO_DENOMINATOR {
        return Err(EvalError::DivisionByZeroRmse { rmse: kf });
    }
    Ok(ape_rmse(frames, reference)? / kf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, dt: f64) -> Trajectory {
        let mut t = Trajectory::new();
        for i in 0..n {
            let x = i as f64;
            t.push(i as f64 * dt, Pose::from_translation(Vector3::new(x, (0.3 * x).sin(), 0.1 * x * x)));
        }
        t
    }

    #[test]
    fn association_drops_samples_outside_half_period() {
        let r = line(10, 1.0);
        let mut e = Trajectory::new();
        e.push(0.4, Pose::identity());
        e.push(1.6, Pose::identity());
        e.push(2.5, Pose::identity());
        e.push(30.0, Pose::identity());
        assert_eq!(associate(&e, &r), vec![(0, 0), (1, 2), (2, 2)]);
    }

    #[test]
    fn two_pairs_are_too_few() {
        let r = line(2, 1.0);
        assert_eq!(ape_rmse(&r, &r), Err(EvalError::TooFewPairs { pairs: 2 }));
    }

    #[test]
    fn verdict_thresholds() {
        assert!(RunVerdict::new(10.0, 0.5).completed);
        assert!(!RunVerdict::new(11.0, 1.0).completed);
        assert!(!RunVerdict::new(0.0, 0.49).completed);
    }
}
