use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FormatError, IoError};
use crate::se3::Pose;

/// Timestamped poses with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    samples: Vec<(f64, Pose)>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails with the offending index if timestamps are not strictly increasing.
    pub fn from_samples(samples: Vec<(f64, Pose)>) -> Result<Self, usize> {
        for i in 1..samples.len() {
            if samples[i].0.partial_cmp(&samples[i - 1].0) != Some(std::cmp::Ordering::Greater) {
                return Err(i);
            }
        }
        Ok(Self { samples })
    }

    /// Appends a sample; returns false and leaves the trajectory unchanged if
    /// `t` does not follow the last timestamp.
    pub fn push(&mut self, t: f64, pose: Pose) -> bool {
        if let Some(&(last, _)) = self.samples.last() {
            if t.partial_cmp(&last) != Some(std::cmp::Ordering::Greater) {
                return false;
            }
        }
        self.samples.push((t, pose));
        true
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[(f64, Pose)] {
        &self.samples
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> + '_ {
        self.samples.iter().map(|s| &s.1)
    }

    /// Applies `t * pose` to every sample.
    pub fn transformed(&self, t: &Pose) -> Trajectory {
        Trajectory {
            samples: self
                .samples
                .iter()
                .map(|(ts, p)| (*ts, t.compose(p)))
                .collect(),
        }
    }
}

pub fn format_tum_line(out: &mut String, t: f64, pose: &Pose) {
    let p = pose.translation();
    let q = pose.rotation().quaternion();
    let _ = writeln!(
        out,
        "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
        t, p.x, p.y, p.z, q.i, q.j, q.k, q.w
    );
}

pub fn format_tum(traj: &Trajectory) -> String {
    let mut s = String::new();
    for (t, p) in traj.samples() {
        format_tum_line(&mut s, *t, p);
    }
    s
}

/// Parses `timestamp tx ty tz qx qy qz qw` lines; `#` comments and blank
/// lines are skipped.
pub fn parse_tum(text: &str, file: &str) -> Result<Trajectory, IoError> {
    let mut traj = Trajectory::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| FormatError::new(file, line_no, format!("bad number: {e}")))?;
        if vals.len() != 8 {
            return Err(FormatError::new(
                file,
                line_no,
                format!("expected 8 fields, found {}", vals.len()),
            )
            .into());
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(FormatError::new(file, line_no, "non-finite value").into());
        }
        let pose = Pose::from_components(
            [vals[1], vals[2], vals[3]],
            [vals[4], vals[5], vals[6], vals[7]],
        )
        .ok_or_else(|| FormatError::new(file, line_no, "zero quaternion"))?;
        if !traj.push(vals[0], pose) {
            return Err(IoError::NonMonotoneTimestamps {
                file: file.to_string(),
                line: line_no,
            });
        }
    }
    Ok(traj)
}

pub fn read_tum(path: &Path) -> Result<Trajectory, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_tum(&text, &path.display().to_string())
}

pub fn write_tum(path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    std::fs::write(path, format_tum(traj)).map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{UnitQuaternion, Vector3};

    #[test]
    fn rejects_repeated_timestamp() {
        let mut t = Trajectory::new();
        assert!(t.push(0.0, Pose::identity()));
        assert!(!t.push(0.0, Pose::identity()));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut t = Trajectory::new();
        for i in 0..20 {
            let q = UnitQuaternion::from_euler_angles(0.1 * i as f64, -0.3, 0.7 + 0.01 * i as f64);
            t.push(0.05 * i as f64, Pose::new(q, Vector3::new(1.0 / 3.0, -2.0, i as f64 * 0.1)));
        }
        let text = format_tum(&t);
        let back = parse_tum(&text, "t.tum").unwrap();
        assert_eq!(back, t);
        assert_eq!(format_tum(&back), text);
    }

    #[test]
    fn shuffled_timestamps_fail() {
        let text = "1 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n";
        match parse_tum(text, "x") {
            Err(IoError::NonMonotoneTimestamps { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_line_names_location() {
        let err = parse_tum("# header\n0 1 2 3\n", "f.tum").unwrap_err();
        assert!(err.to_string().contains("f.tum:2"), "{err}");
    }
}
