use std::path::Path;

use super::{FrameRecord, Sequence};
use crate::camera::CameraIntrinsics;
use crate::error::{FormatError, IoError};
use crate::eval::{read_tum, Trajectory};
use crate::se3::Pose;

/// Pose at time `t` by linear interpolation in the tangent space of the
/// bracketing samples. `None` outside the sampled interval.
pub fn interpolate_pose(traj: &Trajectory, t: f64) -> Option<Pose> {
    let s = traj.samples();
    let first = s.first()?;
    let last = s.last()?;
    if t < first.0 || t > last.0 {
        return None;
    }
    let i = s.partition_point(|(ts, _)| *ts <= t);
    if i == 0 {
        return Some(first.1);
    }
    let (t0, a) = &s[i - 1];
    if *t0 == t || i == s.len() {
        return Some(*a);
    }
    let (t1, b) = &s[i];
    let u = (t - t0) / (t1 - t0);
    let rel = a.inverse().compose(b).log().ok()?;
    Some(a.retract(&(rel.to_vector() * u)))
}

/// Builds a geometry-free sequence from a recorded run.
///
/// `stats` is a `timestamp,n_det,n_trk` CSV; odometry (and ground truth,
/// when given) are TUM files resampled to the stats timestamps.
pub fn ingest_replay(
    stats: &Path,
    odometry: &Path,
    ground_truth: Option<&Path>,
) -> Result<Sequence, IoError> {
    let file = stats.display().to_string();
    let text = std::fs::read_to_string(stats).map_err(|e| IoError::io(stats, e))?;
    let odom = read_tum(odometry)?;
    let gt = ground_truth.map(read_tum).transpose()?;

    let mut rows: Vec<(usize, f64, usize, usize)> = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "timestamp,n_det,n_trk" => {}
        _ => {
            return Err(
                FormatError::new(&file, 1, "expected header 'timestamp,n_det,n_trk'").into(),
            )
        }
    }
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(FormatError::new(&file, line_no, "expected 3 columns").into());
        }
        let bad = |what: &str| FormatError::new(&file, line_no, format!("bad {what}"));
        let t: f64 = f[0].trim().parse().map_err(|_| bad("timestamp"))?;
        let n_det: usize = f[1].trim().parse().map_err(|_| bad("n_det"))?;
        let n_trk: usize = f[2].trim().parse().map_err(|_| bad("n_trk"))?;
        if let Some(&(_, prev, _, _)) = rows.last() {
            if !(t > prev) {
                return Err(IoError::NonMonotoneTimestamps {
                    file: file.clone(),
                    line: line_no,
                });
            }
        }
        rows.push((line_no, t, n_det, n_trk.min(n_det)));
    }

    let mut frames: Vec<FrameRecord> = Vec::with_capacity(rows.len());
    for (k, &(line_no, t, n_det, n_trk)) in rows.iter().enumerate() {
        let pose = interpolate_pose(&odom, t).ok_or_else(|| {
            FormatError::new(&file, line_no, format!("timestamp {t} outside odometry range"))
        })?;
        let gt_pose = match &gt {
            Some(g) => Some(interpolate_pose(g, t).ok_or_else(|| {
                FormatError::new(&file, line_no, format!("timestamp {t} outside ground truth range"))
            })?),
            None => None,
        };
        let dr_delta = match frames.last() {
            Some(prev) => prev.odom.inverse().compose(&pose),
            None => Pose::identity(),
        };
        frames.push(FrameRecord {
            id: k as u64,
            timestamp: t,
            gt: gt_pose,
            odom: pose,
            dr_delta,
            detections: Vec::new(),
            n_det,
            n_trk_hint: Some(n_trk),
        });
    }

    Ok(Sequence {
        camera: CameraIntrinsics::default(),
        landmarks: Vec::new(),
        frames,
        meta: vec![("source".into(), "replay".into())],
    })
}
