//! Run configuration in a plain `key = value` format with `[section]`
//! headers.
//!
//! Keys are unique across sections, so command-line overrides name a key
//! without its section. Resolution order is defaults, then file, then
//! overrides. [`RunConfig::echo`] writes every key back out; parsing an
//! echo yields the same configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::camera::CameraIntrinsics;
use crate::error::ConfigError;
use crate::quality::NominalDrInformation;
use crate::sim::{DensitySegment, DropOut, WorldConfig};
use crate::slam::{Mode, SlamConfig};

pub const SECTIONS: [&str; 9] = [
    "run",
    "quality",
    "tracking",
    "keyframe",
    "loop",
    "solver",
    "motion_solver",
    "world",
    "experiment",
];

/// Bundled scenario presets as `(name, text)`.
pub const PRESETS: [(&str, &str); 3] = [
    ("corridor_gap", include_str!("../configs/corridor_gap.cfg")),
    ("rectangle_loop", include_str!("../configs/rectangle_loop.cfg")),
    ("two_lap", include_str!("../configs/two_lap.cfg")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Named frame range `[start, end)` of a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub loops: usize,
    pub log_alphas: Vec<f64>,
    pub repeats: usize,
    /// Worker threads for sweeps and repeats; 0 uses every core.
    pub jobs: usize,
    pub segments: Vec<Segment>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            loops: 3,
            log_alphas: vec![-2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
            repeats: 5,
            jobs: 0,
            segments: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub slam: SlamConfig,
    pub world: WorldConfig,
    pub experiment: ExperimentConfig,
    /// Input sequence directory.
    pub sequence: Option<PathBuf>,
    sigma_r_deg: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let slam = SlamConfig::default();
        Self {
            sigma_r_deg: slam.nominal.sigma_r.to_degrees(),
            slam,
            world: WorldConfig::default(),
            experiment: ExperimentConfig::default(),
            sequence: None,
        }
    }
}

fn fmt_list<T>(items: &[T], sep: &str, f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(sep)
}

fn parse_list<T>(v: &str, sep: char, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    v.split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect()
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.trim()
        .parse::<T>()
        .map_err(|_| format!("cannot parse '{}'", v.trim()))
}

fn flag(v: &str) -> Result<bool, String> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, got '{other}'")),
    }
}

fn fields<const N: usize>(v: &str, sep: char) -> Result<[&str; N], String> {
    let parts: Vec<&str> = v.split(sep).map(str::trim).collect();
    parts
        .try_into()
        .map_err(|p: Vec<&str>| format!("expected {N} fields separated by '{sep}', got {}", p.len()))
}

impl RunConfig {
    /// Every key with its section and current value, in echo order.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        let s = &self.slam;
        let w = &self.world;
        let t = &w.trajectory;
        let x = &self.experiment;
        let k = &w.camera;
        let mut e = vec![
            ("run", "mode", s.mode.to_string()),
            ("run", "seed", w.seed.to_string()),
            (
                "run",
                "sequence",
                self.sequence
                    .as_ref()
                    .map_or(String::new(), |p| p.display().to_string()),
            ),
            ("quality", "omega1", s.quality.omega1.to_string()),
            ("quality", "omega2", s.quality.omega2.to_string()),
            ("quality", "n_det_ref", s.quality.n_det_ref.to_string()),
            ("quality", "n_trk_ref", s.quality.n_trk_ref.to_string()),
            ("quality", "alpha_min", s.bounds.alpha_min.to_string()),
            ("quality", "alpha_max", s.bounds.alpha_max.to_string()),
            ("quality", "fixed_alpha", s.fixed_alpha.to_string()),
            ("quality", "sigma_t", s.nominal.sigma_t.to_string()),
            ("quality", "sigma_r_deg", self.sigma_r_deg.to_string()),
            ("quality", "c_ref_init", s.c_ref_init.to_string()),
            ("quality", "q_well", s.q_well.to_string()),
            ("quality", "c_ref_window", s.c_ref_window.to_string()),
            ("quality", "smoothing_half_width", s.smoothing_half_width.to_string()),
            ("tracking", "pixel_std", s.pixel_std.to_string()),
            ("tracking", "huber_sigmas", s.huber_sigmas.to_string()),
            ("tracking", "depth_noise", s.depth_noise.to_string()),
            ("tracking", "search_radius", s.search_radius.to_string()),
            ("tracking", "min_inliers", s.min_inliers.to_string()),
            ("tracking", "lost_frames", s.lost_frames.to_string()),
            ("keyframe", "k_max", s.k_max.to_string()),
            ("keyframe", "overlap_ratio", s.overlap_ratio.to_string()),
            ("keyframe", "d_max", s.d_max.to_string()),
            ("keyframe", "covisible_limit", s.covisible_limit.to_string()),
            ("loop", "loop_enabled", s.loop_enabled.to_string()),
            ("loop", "loop_radius", s.loop_radius.to_string()),
            ("loop", "loop_gap_min", s.loop_gap_min.to_string()),
            ("loop", "loop_info_scale", s.loop_info_scale.to_string()),
        ];
        for (section, prefix, c) in [("solver", "", &s.solver), ("motion_solver", "motion_", &s.motion_solver)] {
            let keys = solver_keys(prefix);
            let vals = [
                c.max_iterations.to_string(),
                c.initial_damping.to_string(),
                c.damping_up.to_string(),
                c.damping_down.to_string(),
                c.cost_tolerance.to_string(),
                c.step_tolerance.to_string(),
            ];
            for (key, v) in keys.into_iter().zip(vals) {
                e.push((section, key, v));
            }
        }
        e.extend([
            ("world", "waypoints", fmt_list(&t.waypoints, "; ", |p| format!("{}, {}", p[0], p[1]))),
            ("world", "closed", t.closed.to_string()),
            ("world", "laps", t.laps.to_string()),
            ("world", "frames", t.frames.to_string()),
            ("world", "frame_dt", t.frame_dt.to_string()),
            ("world", "height", t.height.to_string()),
            ("world", "corner_blend", t.corner_blend.to_string()),
            (
                "world",
                "density",
                fmt_list(&w.density, "; ", |d| format!("{}:{}:{}", d.until_s, d.landmarks, d.clutter)),
            ),
            (
                "world",
                "dropouts",
                fmt_list(&w.dropouts, "; ", |d| format!("{}:{}:{}", d.start, d.end, d.n_det)),
            ),
            ("world", "detection_cap", w.detection_cap.to_string()),
            ("world", "sim_pixel_std", w.pixel_std.to_string()),
            ("world", "dr_sigma_t", w.dr_noise.sigma_t.to_string()),
            ("world", "dr_sigma_r_deg", w.dr_noise.sigma_r_deg.to_string()),
            ("world", "dr_scale_bias", w.dr_noise.scale_bias.to_string()),
            ("world", "dr_yaw_bias_deg", w.dr_noise.yaw_bias_deg.to_string()),
            ("world", "depth_min", w.depth_range.0.to_string()),
            ("world", "depth_max", w.depth_range.1.to_string()),
            (
                "world",
                "camera",
                format!("{}, {}, {}, {}, {}, {}", k.fx, k.fy, k.cx, k.cy, k.width, k.height),
            ),
            ("experiment", "loops", x.loops.to_string()),
            ("experiment", "log_alphas", fmt_list(&x.log_alphas, ", ", f64::to_string)),
            ("experiment", "repeats", x.repeats.to_string()),
            ("experiment", "jobs", x.jobs.to_string()),
            (
                "experiment",
                "segments",
                fmt_list(&x.segments, "; ", |g| format!("{}:{}:{}", g.name, g.start, g.end)),
            ),
        ]);
        e
    }

    /// Section that owns `key`.
    pub fn section_of(key: &str) -> Option<&'static str> {
        RunConfig::default()
            .entries()
            .into_iter()
            .find(|(_, k, _)| *k == key)
            .map(|(s, _, _)| s)
    }

    /// Sets one key from its text value. `Ok(false)` when the key is unknown.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        let v = value.trim();
        let s = &mut self.slam;
        let w = &mut self.world;
        match key {
            "mode" => s.mode = v.parse::<Mode>()?,
            "seed" => w.seed = num(v)?,
            "sequence" => self.sequence = (!v.is_empty()).then(|| PathBuf::from(v)),
            "omega1" => s.quality.omega1 = num(v)?,
            "omega2" => s.quality.omega2 = num(v)?,
            "n_det_ref" => s.quality.n_det_ref = num(v)?,
            "n_trk_ref" => s.quality.n_trk_ref = num(v)?,
            "alpha_min" => s.bounds.alpha_min = num(v)?,
            "alpha_max" => s.bounds.alpha_max = num(v)?,
            "fixed_alpha" => s.fixed_alpha = num(v)?,
            "sigma_t" => s.nominal.sigma_t = num(v)?,
            "sigma_r_deg" => {
                self.sigma_r_deg = num(v)?;
                s.nominal = NominalDrInformation::from_degrees(s.nominal.sigma_t, self.sigma_r_deg);
            }
            "c_ref_init" => s.c_ref_init = num(v)?,
            "q_well" => s.q_well = num(v)?,
            "c_ref_window" => s.c_ref_window = num(v)?,
            "smoothing_half_width" => s.smoothing_half_width = num(v)?,
            "pixel_std" => s.pixel_std = num(v)?,
            "huber_sigmas" => s.huber_sigmas = num(v)?,
            "depth_noise" => s.depth_noise = num(v)?,
            "search_radius" => s.search_radius = num(v)?,
            "min_inliers" => s.min_inliers = num(v)?,
            "lost_frames" => s.lost_frames = num(v)?,
            "k_max" => s.k_max = num(v)?,
            "overlap_ratio" => s.overlap_ratio = num(v)?,
            "d_max" => s.d_max = num(v)?,
            "covisible_limit" => s.covisible_limit = num(v)?,
            "loop_enabled" => s.loop_enabled = flag(v)?,
            "loop_radius" => s.loop_radius = num(v)?,
            "loop_gap_min" => s.loop_gap_min = num(v)?,
            "loop_info_scale" => s.loop_info_scale = num(v)?,
            "waypoints" => {
                w.trajectory.waypoints = parse_list(v, ';', |p| {
                    let [x, y] = fields::<2>(p, ',')?;
                    Ok([num(x)?, num(y)?])
                })?
            }
            "closed" => w.trajectory.closed = flag(v)?,
            "laps" => w.trajectory.laps = num(v)?,
            "frames" => w.trajectory.frames = num(v)?,
            "frame_dt" => w.trajectory.frame_dt = num(v)?,
            "height" => w.trajectory.height = num(v)?,
            "corner_blend" => w.trajectory.corner_blend = num(v)?,
            "density" => {
                w.density = parse_list(v, ';', |p| {
                    let [u, l, c] = fields::<3>(p, ':')?;
                    Ok(DensitySegment {
                        until_s: num(u)?,
                        landmarks: num(l)?,
                        clutter: num(c)?,
                    })
                })?
            }
            "dropouts" => {
                w.dropouts = parse_list(v, ';', |p| {
                    let [a, b, n] = fields::<3>(p, ':')?;
                    Ok(DropOut {
                        start: num(a)?,
                        end: num(b)?,
                        n_det: num(n)?,
                    })
                })?
            }
            "detection_cap" => w.detection_cap = num(v)?,
            "sim_pixel_std" => w.pixel_std = num(v)?,
            "dr_sigma_t" => w.dr_noise.sigma_t = num(v)?,
            "dr_sigma_r_deg" => w.dr_noise.sigma_r_deg = num(v)?,
            "dr_scale_bias" => w.dr_noise.scale_bias = num(v)?,
            "dr_yaw_bias_deg" => w.dr_noise.yaw_bias_deg = num(v)?,
            "depth_min" => w.depth_range.0 = num(v)?,
            "depth_max" => w.depth_range.1 = num(v)?,
            "camera" => {
                let [fx, fy, cx, cy, wd, ht] = fields::<6>(v, ',')?;
                w.camera = CameraIntrinsics {
                    fx: num(fx)?,
                    fy: num(fy)?,
                    cx: num(cx)?,
                    cy: num(cy)?,
                    width: num(wd)?,
                    height: num(ht)?,
                };
            }
            "loops" => self.experiment.loops = num(v)?,
            "log_alphas" => self.experiment.log_alphas = parse_list(v, ',', num)?,
            "repeats" => self.experiment.repeats = num(v)?,
            "jobs" => self.experiment.jobs = num(v)?,
            "segments" => {
                self.experiment.segments = parse_list(v, ';', |p| {
                    let [name, a, b] = fields::<3>(p, ':')?;
                    Ok(Segment {
                        name: name.to_string(),
                        start: num(a)?,
                        end: num(b)?,
                    })
                })?
            }
            other => {
                let (motion, base) = match other.strip_prefix("motion_") {
                    Some(b) => (true, b),
                    None => (false, other),
                };
                let c = if motion { &mut s.motion_solver } else { &mut s.solver };
                match base {
                    "max_iterations" => c.max_iterations = num(v)?,
                    "initial_damping" => c.initial_damping = num(v)?,
                    "damping_up" => c.damping_up = num(v)?,
                    "damping_down" => c.damping_down = num(v)?,
                    "cost_tolerance" => c.cost_tolerance = num(v)?,
                    "step_tolerance" => c.step_tolerance = num(v)?,
                    _ => return Ok(false),
                }
            }
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.slam;
        s.quality.validate()?;
        s.bounds.validate()?;
        s.nominal.validate()?;
        for c in [&s.solver, &s.motion_solver] {
            c.validate().map_err(|e| ConfigError::Constraint(e.to_string()))?;
        }
        self.world
            .validate()
            .map_err(|e| ConfigError::Constraint(e.to_string()))?;
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Constraint(msg.into()))
            }
        };
        check(s.fixed_alpha > 0.0, "fixed_alpha must be positive")?;
        check(s.pixel_std > 0.0, "pixel_std must be positive")?;
        check(s.huber_sigmas > 0.0, "huber_sigmas must be positive")?;
        check(s.depth_noise >= 0.0, "depth_noise must be >= 0")?;
        check(s.search_radius > 0.0, "search_radius must be positive")?;
        check(s.q_well >= 0.0 && s.q_well <= 1.0, "q_well must lie in [0, 1]")?;
        check(s.c_ref_init > 0.0 && s.c_ref_window > 0, "c_ref_init and c_ref_window must be positive")?;
        check(s.k_max > 0, "k_max must be positive")?;
        check(s.lost_frames > 0, "lost_frames must be positive")?;
        check(s.loop_info_scale > 0.0, "loop_info_scale must be positive")?;
        let x = &self.experiment;
        check(x.loops > 0 && x.repeats > 0, "loops and repeats must be positive")?;
        check(!x.log_alphas.is_empty(), "log_alphas must not be empty")?;
        check(
            x.log_alphas.iter().all(|a| a.is_finite()),
            "log_alphas must be finite",
        )?;
        check(
            x.segments.iter().all(|g| g.start < g.end),
            "every segment needs start < end",
        )?;
        Ok(())
    }

    /// Applies `key = value` lines of `text` on top of `self`.
    pub fn merge_str(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::UnknownSection {
                        section: name.to_string(),
                        line,
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = l.split_once('=') else {
                return Err(ConfigError::Malformed { line });
            };
            let key = key.trim();
            let Some(home) = Self::section_of(key) else {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    line,
                });
            };
            if section.as_deref() != Some(home) {
                return Err(ConfigError::WrongSection {
                    key: key.to_string(),
                    expected: home.to_string(),
                    line,
                });
            }
            self.set(key, value).map_err(|message| ConfigError::InvalidValue {
                key: key.to_string(),
                line,
                message,
            })?;
        }
        Ok(())
    }

    /// Applies a `key=value` command-line override.
    pub fn apply_override(&mut self, arg: &str) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::Override {
            arg: arg.to_string(),
            message,
        };
        let (key, value) = arg
            .split_once('=')
            .ok_or_else(|| bad("expected key=value".into()))?;
        let key = key.trim();
        let key = key.rsplit_once('.').map_or(key, |(_, k)| k);
        match self.set(key, value) {
            Ok(true) => Ok(()),
            Ok(false) => Err(bad(format!("unknown key `{key}`"))),
            Err(m) => Err(bad(m)),
        }
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.merge_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Defaults, then the file or preset named by `source`, then `overrides`.
    pub fn resolve(source: Option<&str>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        if let Some(src) = source {
            let path = Path::new(src);
            let text = if path.exists() {
                std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
                    path: src.to_string(),
                    message: e.to_string(),
                })?
            } else if let Some(t) = preset(src) {
                t.to_string()
            } else {
                return Err(ConfigError::Read {
                    path: src.to_string(),
                    message: "no such file or bundled preset".into(),
                });
            };
            c.merge_str(&text)?;
        }
        for o in overrides {
            c.apply_override(o)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Every key grouped by section, readable by [`RunConfig::parse_str`].
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (section, key, value) in self.entries() {
            if section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

fn solver_keys(prefix: &str) -> [&'static str; 6] {
    if prefix.is_empty() {
        [
            "max_iterations",
            "initial_damping",
            "damping_up",
            "damping_down",
            "cost_tolerance",
            "step_tolerance",
        ]
    } else {
        [
            "motion_max_iterations",
            "motion_initial_damping",
            "motion_damping_up",
            "motion_damping_down",
            "motion_cost_tolerance",
            "motion_step_tolerance",
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = RunConfig::parse_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.slam.quality.omega1, 0.5);
        assert_eq!(c.slam.bounds.alpha_min, 0.1);
        assert_eq!(c.slam.bounds.alpha_max, 1000.0);
    }

    #[test]
    fn echo_round_trips() {
        for (name, text) in PRESETS {
            let c = RunConfig::parse_str(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            let back = RunConfig::parse_str(&c.echo()).unwrap();
            assert_eq!(back, c, "{name}");
            assert_eq!(back.echo(), c.echo());
        }
    }

    #[test]
    fn every_entry_is_settable() {
        let c = RunConfig::default();
        for (_, key, value) in c.entries() {
            let mut d = RunConfig::default();
            assert_eq!(d.set(key, &value), Ok(true), "{key}");
        }
    }

    #[test]
    fn misspelled_key_is_named() {
        let err = RunConfig::parse_str("[quality]\nalpha_mx = 5\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                key: "alpha_mx".into(),
                line: 2
            }
        );
        assert!(err.to_string().contains("alpha_mx"));
    }

    #[test]
    fn key_outside_its_section() {
        let err = RunConfig::parse_str("[world]\nalpha_max = 5\n").unwrap_err();
        assert!(matches!(err, ConfigError::WrongSection { line: 2, .. }));
    }

    #[test]
    fn ill_typed_value() {
        let err = RunConfig::parse_str("[keyframe]\n\nk_max = many\n").unwrap_err();
        assert!(matches!(err, ConfigError::InvalidValue { line: 3, .. }));
    }

    #[test]
    fn override_shows_in_echo() {
        let c = RunConfig::resolve(None, &["alpha_max=100".into()]).unwrap();
        assert_eq!(c.slam.bounds.alpha_max, 100.0);
        assert!(c.echo().contains("alpha_max = 100\n"));
        let c = RunConfig::resolve(None, &["quality.alpha_min=0.5".into()]).unwrap();
        assert_eq!(c.slam.bounds.alpha_min, 0.5);
    }

    #[test]
    fn constraint_violations_are_rejected() {
        assert!(matches!(
            RunConfig::parse_str("[quality]\nomega1 = 0.7\n"),
            Err(ConfigError::Constraint(_))
        ));
        assert!(RunConfig::resolve(None, &["bogus=1".into()]).is_err());
    }
}
