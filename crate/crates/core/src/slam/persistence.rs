//! Text map format.
//!
//! ```text
//! GWMAP v1
//! camera <fx> <fy> <cx> <cy> <width> <height>
//! c_ref <value> <q_well> <window>
//! next_ids <keyframe> <point>
//! keyframes <n>
//! kf <id> <frame_id> <t> <tx> <ty> <tz> <qx> <qy> <qz> <qw> <lba_alpha> <quality> <tracked> <n_obs>
//! obs <point> <u> <v> <depth|->           (n_obs lines after each kf)
//! mappoints <n>
//! mp <id> <landmark> <x> <y> <z> <lba_count> <observer>...
//! covisibility <n>
//! cov <kf_a> <kf_b> <count>                (a < b)
//! dr_edges <n>
//! dr <from> <to> <tx> <ty> <tz> <qx> <qy> <qz> <qw> <alpha>
//! loop_edges <n>
//! loop <from> <to> <tx> <ty> <tz> <qx> <qy> <qz> <qw> <info_scale>
//! ```
//!
//! Floats use the shortest representation that reads back to the same bits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Vector2, Vector3};

use super::map::{DrEdge, KeyFrame, KfObservation, LoopEdge, MapPoint, SlamMap};
use crate::camera::CameraIntrinsics;
use crate::error::{FormatError, IoError};
use crate::quality::ConnectionReference;
use crate::se3::Pose;

const HEADER: &str = "GWMAP v1";

fn pose_fields(out: &mut String, p: &Pose) {
    let t = p.translation();
    let q = p.rotation().quaternion();
    let _ = write!(
        out,
        "{:e} {:e} {:e} {:e} {:e} {:e} {:e}",
        t.x, t.y, t.z, q.i, q.j, q.k, q.w
    );
}

pub fn serialize_map(map: &SlamMap) -> String {
    let mut s = String::new();
    let k = &map.camera;
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(
        s,
        "camera {:e} {:e} {:e} {:e} {} {}",
        k.fx, k.fy, k.cx, k.cy, k.width, k.height
    );
    let _ = writeln!(
        s,
        "c_ref {:e} {:e} {}",
        map.c_ref.value(),
        map.c_ref.q_well(),
        map.c_ref.window()
    );
    let _ = writeln!(s, "next_ids {} {}", map.next_keyframe_id, map.next_point_id);

    let _ = writeln!(s, "keyframes {}", map.keyframes.len());
    for kf in map.keyframes.values() {
        let _ = write!(s, "kf {} {} {:e} ", kf.id, kf.frame_id, kf.timestamp);
        pose_fields(&mut s, &kf.pose);
        let _ = writeln!(
            s,
            " {:e} {:e} {} {}",
            kf.lba_alpha,
            kf.quality,
            kf.tracked_points,
            kf.observations.len()
        );
        for o in &kf.observations {
            let _ = write!(s, "obs {} {:e} {:e} ", o.point, o.pixel.x, o.pixel.y);
            match o.depth {
                Some(d) => {
                    let _ = writeln!(s, "{d:e}");
                }
                None => s.push_str("-\n"),
            }
        }
    }

    let _ = writeln!(s, "mappoints {}", map.points.len());
    for p in map.points.values() {
        let _ = write!(
            s,
            "mp {} {} {:e} {:e} {:e} {}",
            p.id, p.landmark, p.position.x, p.position.y, p.position.z, p.lba_count
        );
        for o in &p.observers {
            let _ = write!(s, " {o}");
        }
        s.push('\n');
    }

    let mut cov = Vec::new();
    for kf in map.keyframes.values() {
        for (&other, &c) in &kf.covisibility {
            if kf.id < other {
                cov.push((kf.id, other, c));
            }
        }
    }
    let _ = writeln!(s, "covisibility {}", cov.len());
    for (a, b, c) in cov {
        let _ = writeln!(s, "cov {a} {b} {c}");
    }

    let _ = writeln!(s, "dr_edges {}", map.dr_edges.len());
    for e in &map.dr_edges {
        let _ = write!(s, "dr {} {} ", e.from, e.to);
        pose_fields(&mut s, &e.delta);
        let _ = writeln!(s, " {:e}", e.alpha);
    }
    let _ = writeln!(s, "loop_edges {}", map.loop_edges.len());
    for e in &map.loop_edges {
        let _ = write!(s, "loop {} {} ", e.from, e.to);
        pose_fields(&mut s, &e.delta);
        let _ = writeln!(s, " {:e}", e.info_scale);
    }
    s
}

pub fn save_map(map: &SlamMap, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, serialize_map(map)).map_err(|e| IoError::io(path, e))
}

pub fn load_map(path: &Path) -> Result<SlamMap, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    Ok(parse_map(&text, &path.display().to_string())?)
}

struct Cursor<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    file: &'a str,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> FormatError {
        FormatError::new(self.file, self.line, msg)
    }

    /// Next line split into fields; its first field must equal `tag`.
    fn record(&mut self, tag: &str, fields: Option<usize>) -> Result<Vec<&'a str>, FormatError> {
        let (i, line) = self.lines.next().ok_or_else(|| {
            FormatError::new(self.file, self.line + 1, format!("unexpected end of file, expected '{tag}'"))
        })?;
        self.line = i + 1;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.first() != Some(&tag) {
            return Err(self.err(format!("expected '{tag}' record")));
        }
        if let Some(n) = fields {
            if parts.len() != n + 1 {
                return Err(self.err(format!(
                    "'{tag}' needs {n} fields, found {}",
                    parts.len() - 1
                )));
            }
        }
        Ok(parts[1..].to_vec())
    }

    fn num<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T, FormatError> {
        s.parse::<T>()
            .map_err(|_| self.err(format!("bad {what} '{s}'")))
    }

    fn pose(&self, f: &[&str]) -> Result<Pose, FormatError> {
        let mut v = [0.0; 7];
        for (i, x) in f.iter().take(7).enumerate() {
            v[i] = self.num(x, "pose value")?;
        }
        Pose::from_components([v[0], v[1], v[2]], [v[3], v[4], v[5], v[6]])
            .ok_or_else(|| self.err("invalid pose"))
    }

    fn count(&mut self, tag: &str) -> Result<usize, FormatError> {
        let f = self.record(tag, Some(1))?;
        self.num(f[0], "count")
    }
}

pub fn parse_map(text: &str, file: &str) -> Result<SlamMap, FormatError> {
    let mut c = Cursor {
        lines: text.lines().enumerate(),
        file,
        line: 0,
    };
    match c.lines.next() {
        Some((_, l)) if l.trim() == HEADER => c.line = 1,
        _ => return Err(FormatError::new(file, 1, format!("missing '{HEADER}' header"))),
    }

    let f = c.record("camera", Some(6))?;
    let camera = CameraIntrinsics {
        fx: c.num(f[0], "fx")?,
        fy: c.num(f[1], "fy")?,
        cx: c.num(f[2], "cx")?,
        cy: c.num(f[3], "cy")?,
        width: c.num(f[4], "width")?,
        height: c.num(f[5], "height")?,
    };
    camera.validate().map_err(|e| c.err(e.to_string()))?;
    let f = c.record("c_ref", Some(3))?;
    let c_ref = ConnectionReference::new(
        c.num(f[0], "c_ref")?,
        c.num(f[1], "q_well")?,
        c.num(f[2], "window")?,
    );
    let mut map = SlamMap::new(camera, c_ref);
    let f = c.record("next_ids", Some(2))?;
    map.next_keyframe_id = c.num(f[0], "keyframe id")?;
    map.next_point_id = c.num(f[1], "point id")?;

    let n = c.count("keyframes")?;
    for _ in 0..n {
        let f = c.record("kf", Some(14))?;
        let id: u64 = c.num(f[0], "keyframe id")?;
        let n_obs: usize = c.num(f[13], "observation count")?;
        let mut kf = KeyFrame {
            id,
            frame_id: c.num(f[1], "frame id")?,
            timestamp: c.num(f[2], "timestamp")?,
            pose: c.pose(&f[3..10])?,
            observations: Vec::with_capacity(n_obs),
            covisibility: BTreeMap::new(),
            lba_alpha: c.num(f[10], "alpha")?,
            quality: c.num(f[11], "quality")?,
            tracked_points: c.num(f[12], "tracked count")?,
        };
        for _ in 0..n_obs {
            let o = c.record("obs", Some(4))?;
            let depth = match o[3] {
                "-" => None,
                d => Some(c.num(d, "depth")?),
            };
            kf.observations.push(KfObservation {
                point: c.num(o[0], "point id")?,
                pixel: Vector2::new(c.num(o[1], "u")?, c.num(o[2], "v")?),
                depth,
            });
        }
        if map.keyframes.insert(id, kf).is_some() {
            return Err(c.err(format!("duplicate keyframe {id}")));
        }
    }

    let n = c.count("mappoints")?;
    for _ in 0..n {
        let f = c.record("mp", None)?;
        if f.len() < 6 {
            return Err(c.err("'mp' needs at least 6 fields"));
        }
        let id: u64 = c.num(f[0], "point id")?;
        let mut observers = BTreeSet::new();
        for o in &f[6..] {
            observers.insert(c.num::<u64>(o, "observer")?);
        }
        let p = MapPoint {
            id,
            landmark: c.num(f[1], "landmark id")?,
            position: Vector3::new(c.num(f[2], "x")?, c.num(f[3], "y")?, c.num(f[4], "z")?),
            observers,
            lba_count: c.num(f[5], "lba count")?,
        };
        if map.points.insert(id, p).is_some() {
            return Err(c.err(format!("duplicate map point {id}")));
        }
    }

    let n = c.count("covisibility")?;
    for _ in 0..n {
        let f = c.record("cov", Some(3))?;
        let a: u64 = c.num(f[0], "keyframe id")?;
        let b: u64 = c.num(f[1], "keyframe id")?;
        let w: usize = c.num(f[2], "count")?;
        if !map.keyframes.contains_key(&a) || !map.keyframes.contains_key(&b) {
            return Err(c.err("covisibility references an unknown keyframe"));
        }
        map.keyframes.get_mut(&a).unwrap().covisibility.insert(b, w);
        map.keyframes.get_mut(&b).unwrap().covisibility.insert(a, w);
    }

    let n = c.count("dr_edges")?;
    for _ in 0..n {
        let f = c.record("dr", Some(10))?;
        map.dr_edges.push(DrEdge {
            from: c.num(f[0], "keyframe id")?,
            to: c.num(f[1], "keyframe id")?,
            delta: c.pose(&f[2..9])?,
            alpha: c.num(f[9], "alpha")?,
        });
    }
    let n = c.count("loop_edges")?;
    for _ in 0..n {
        let f = c.record("loop", Some(10))?;
        map.loop_edges.push(LoopEdge {
            from: c.num(f[0], "keyframe id")?,
            to: c.num(f[1], "keyframe id")?,
            delta: c.pose(&f[2..9])?,
            info_scale: c.num(f[9], "information scale")?,
        });
    }
    map.restore_index();
    Ok(map)
}
