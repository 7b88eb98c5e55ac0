//! Sequence directory layout:
//!
//! ```text
//! meta        key=value header (format, camera, generator settings)
//! gt.tum      ground-truth camera poses
//! odom.tum    dead-reckoning poses; increments are recovered by composition
//! obs.csv     frame_id,landmark_id,u,v   (landmark_id -1 marks clutter)
//! stats.csv   frame_id,n_det[,n_trk]
//! world.csv   landmark_id,x,y,z
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Vector2, Vector3};

use super::world::Landmark;
use super::{Detection, FrameRecord, Sequence};
use crate::camera::CameraIntrinsics;
use crate::error::{FormatError, IoError};
use crate::eval::{format_tum_line, parse_tum};
use crate::se3::Pose;

const FORMAT: &str = "GWSEQ v1";

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|e| IoError::io(path, e))
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub fn write_sequence(seq: &Sequence, dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let k = &seq.camera;
    let mut meta = String::new();
    let _ = writeln!(meta, "format={FORMAT}");
    let _ = writeln!(meta, "frames={}", seq.frames.len());
    let _ = writeln!(meta, "landmarks={}", seq.landmarks.len());
    let _ = writeln!(
        meta,
        "camera={:.16e},{:.16e},{:.16e},{:.16e},{},{}",
        k.fx, k.fy, k.cx, k.cy, k.width, k.height
    );
    for (key, v) in &seq.meta {
        let _ = writeln!(meta, "{key}={v}");
    }
    write(&dir.join("meta"), &meta)?;

    if seq.has_geometry() {
        let mut gt = String::new();
        for f in &seq.frames {
            format_tum_line(&mut gt, f.timestamp, f.gt.as_ref().unwrap());
        }
        write(&dir.join("gt.tum"), &gt)?;
    }

    let mut odom = String::new();
    for f in &seq.frames {
        format_tum_line(&mut odom, f.timestamp, &f.odom);
    }
    write(&dir.join("odom.tum"), &odom)?;

    let total: usize = seq.frames.iter().map(|f| f.detections.len()).sum();
    let mut obs = String::with_capacity(64 * total + 32);
    obs.push_str("frame_id,landmark_id,u,v\n");
    for f in &seq.frames {
        for d in &f.detections {
            let id = d.landmark.map_or(-1, |v| v as i64);
            let _ = writeln!(obs, "{},{},{:.16e},{:.16e}", f.id, id, d.pixel.x, d.pixel.y);
        }
    }
    write(&dir.join("obs.csv"), &obs)?;

    let hints = seq.frames.iter().any(|f| f.n_trk_hint.is_some());
    let mut stats = String::from(if hints {
        "frame_id,n_det,n_trk\n"
    } else {
        "frame_id,n_det\n"
    });
    for f in &seq.frames {
        if hints {
            let _ = writeln!(stats, "{},{},{}", f.id, f.n_det, f.n_trk_hint.unwrap_or(0));
        } else {
            let _ = writeln!(stats, "{},{}", f.id, f.n_det);
        }
    }
    write(&dir.join("stats.csv"), &stats)?;

    let mut world = String::from("landmark_id,x,y,z\n");
    for l in &seq.landmarks {
        let p = l.position;
        let _ = writeln!(world, "{},{:.16e},{:.16e},{:.16e}", l.id, p.x, p.y, p.z);
    }
    write(&dir.join("world.csv"), &world)
}

/// Rows of a headed CSV file, checked against the expected columns.
fn csv_rows<'a>(
    text: &'a str,
    file: &str,
    header: &[&[&str]],
) -> Result<(usize, Vec<(usize, Vec<&'a str>)>), FormatError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| FormatError::new(file, 1, "missing header"))?;
    let cols: Vec<&str> = first.trim().split(',').collect();
    let variant = header
        .iter()
        .position(|h| *h == cols.as_slice())
        .ok_or_else(|| {
            FormatError::new(
                file,
                1,
                format!("unexpected header '{}', expected '{}'", first, header[0].join(",")),
            )
        })?;
    let width = header[variant].len();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(FormatError::new(
                file,
                i + 1,
                format!("expected {width} columns, found {}", fields.len()),
            ));
        }
        rows.push((i + 1, fields));
    }
    Ok((variant, rows))
}

fn field<T: std::str::FromStr>(s: &str, file: &str, line: usize, name: &str) -> Result<T, FormatError>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse::<T>()
        .map_err(|e| FormatError::new(file, line, format!("bad {name} '{s}': {e}")))
}

fn parse_meta(text: &str) -> Result<(CameraIntrinsics, Vec<(String, String)>), FormatError> {
    let file = "meta";
    let mut camera = None;
    let mut format_ok = false;
    let mut extra = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| FormatError::new(file, line_no, "expected key=value"))?;
        match key {
            "format" => {
                if value != FORMAT {
                    return Err(FormatError::new(file, line_no, format!("unsupported format '{value}'")));
                }
                format_ok = true;
            }
            "frames" | "landmarks" => {}
            "camera" => {
                let v: Vec<&str> = value.split(',').collect();
                if v.len() != 6 {
                    return Err(FormatError::new(file, line_no, "camera needs 6 values"));
                }
                let k = CameraIntrinsics {
                    fx: field(v[0], file, line_no, "fx")?,
                    fy: field(v[1], file, line_no, "fy")?,
                    cx: field(v[2], file, line_no, "cx")?,
                    cy: field(v[3], file, line_no, "cy")?,
                    width: field(v[4], file, line_no, "width")?,
                    height: field(v[5], file, line_no, "height")?,
                };
                k.validate()
                    .map_err(|e| FormatError::new(file, line_no, e.to_string()))?;
                camera = Some(k);
            }
            _ => extra.push((key.to_string(), value.to_string())),
        }
    }
    if !format_ok {
        return Err(FormatError::new(file, 1, "missing format line"));
    }
    let camera = camera.ok_or_else(|| FormatError::new(file, 1, "missing camera line"))?;
    Ok((camera, extra))
}

pub fn read_sequence(dir: &Path) -> Result<Sequence, IoError> {
    let (camera, meta) = parse_meta(&read(&dir.join("meta"))?)?;

    let odom_path = dir.join("odom.tum");
    let odom = parse_tum(&read(&odom_path)?, "odom.tum")?;
    let gt_path = dir.join("gt.tum");
    let gt = if gt_path.exists() {
        let t = parse_tum(&read(&gt_path)?, "gt.tum")?;
        if t.len() != odom.len() {
            return Err(FormatError::new(
                "gt.tum",
                t.len() + 1,
                format!("{} poses but odometry has {}", t.len(), odom.len()),
            )
            .into());
        }
        Some(t)
    } else {
        None
    };

    let world_text = read(&dir.join("world.csv"))?;
    let (_, rows) = csv_rows(&world_text, "world.csv", &[&["landmark_id", "x", "y", "z"]])?;
    let mut landmarks = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        let file = "world.csv";
        landmarks.push(Landmark {
            id: field(f[0], file, line, "landmark_id")?,
            position: Vector3::new(
                field(f[1], file, line, "x")?,
                field(f[2], file, line, "y")?,
                field(f[3], file, line, "z")?,
            ),
        });
    }

    let n = odom.len();
    let stats_text = read(&dir.join("stats.csv"))?;
    let (variant, rows) = csv_rows(
        &stats_text,
        "stats.csv",
        &[&["frame_id", "n_det"], &["frame_id", "n_det", "n_trk"]],
    )?;
    if rows.len() != n {
        return Err(FormatError::new(
            "stats.csv",
            rows.len() + 1,
            format!("{} rows but odometry has {n} poses", rows.len()),
        )
        .into());
    }
    let mut n_det = Vec::with_capacity(n);
    let mut hints = Vec::with_capacity(n);
    for (k, (line, f)) in rows.into_iter().enumerate() {
        let id: usize = field(f[0], "stats.csv", line, "frame_id")?;
        if id != k {
            return Err(FormatError::new("stats.csv", line, format!("expected frame {k}")).into());
        }
        n_det.push(field::<usize>(f[1], "stats.csv", line, "n_det")?);
        hints.push(if variant == 1 {
            Some(field::<usize>(f[2], "stats.csv", line, "n_trk")?)
        } else {
            None
        });
    }

    let obs_text = read(&dir.join("obs.csv"))?;
    let (_, rows) = csv_rows(&obs_text, "obs.csv", &[&["frame_id", "landmark_id", "u", "v"]])?;
    let mut detections: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
    for (line, f) in rows {
        let file = "obs.csv";
        let frame: usize = field(f[0], file, line, "frame_id")?;
        if frame >= n {
            return Err(FormatError::new(file, line, format!("frame {frame} out of range")).into());
        }
        let id: i64 = field(f[1], file, line, "landmark_id")?;
        let landmark = match id {
            -1 => None,
            i if i >= 0 => Some(i as u64),
            _ => return Err(FormatError::new(file, line, "negative landmark id").into()),
        };
        detections.entry(frame).or_default().push(Detection {
            landmark,
            pixel: Vector2::new(field(f[2], file, line, "u")?, field(f[3], file, line, "v")?),
        });
    }

    let mut frames = Vec::with_capacity(n);
    let samples = odom.samples();
    for (i, (t, pose)) in samples.iter().enumerate() {
        let dr_delta = if i == 0 {
            Pose::identity()
        } else {
            samples[i - 1].1.inverse().compose(pose)
        };
        frames.push(FrameRecord {
            id: i as u64,
            timestamp: *t,
            gt: gt.as_ref().map(|g| g.samples()[i].1),
            odom: *pose,
            dr_delta,
            detections: detections.remove(&i).unwrap_or_default(),
            n_det: n_det[i],
            n_trk_hint: hints[i],
        });
    }

    Ok(Sequence {
        camera,
        landmarks,
        frames,
        meta,
    })
}
