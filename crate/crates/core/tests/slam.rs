mod common;

use common::preset_config;
use drslam::sim::{generate_sequence, Sequence};
use drslam::slam::{parse_map, run_sequence, serialize_map, Mode, Pipeline, SlamConfig};

fn corridor(frames: usize) -> (Sequence, SlamConfig) {
    let mut c = preset_config("corridor_gap");
    c.set("frames", &frames.to_string()).unwrap();
    c.set("dropouts", "100:130:0").unwrap();
    (generate_sequence(&c.world).unwrap(), c.slam)
}

fn with_mode(c: &SlamConfig, mode: Mode) -> SlamConfig {
    SlamConfig { mode, ..c.clone() }
}

#[test]
fn one_finite_pose_per_frame_in_every_mode() {
    let (seq, base) = corridor(200);
    for mode in [Mode::Adaptive, Mode::VisionOnly, Mode::FixedDr, Mode::DrOnly, Mode::DaOnly] {
        let out = run_sequence(&seq, &with_mode(&base, mode));
        assert_eq!(out.frames.len(), seq.frames.len(), "{mode:?}");
        for (r, f) in out.frames.iter().zip(&seq.frames) {
            assert_eq!(r.id, f.id);
            assert!(r.pose.is_finite(), "{mode:?} frame {}", r.id);
        }
    }
}

#[test]
fn adaptive_mode_never_loses_tracking() {
    let (seq, base) = corridor(200);
    let out = run_sequence(&seq, &with_mode(&base, Mode::Adaptive));
    assert!(out.completed());
    assert!(out.frames[100..130].iter().all(|f| f.alpha.is_some()));
}

#[test]
fn vision_only_loses_tracking_in_the_gap() {
    let (seq, base) = corridor(200);
    let out = run_sequence(&seq, &with_mode(&base, Mode::VisionOnly));
    let lost = out.lost_at.expect("tracking lost");
    assert!((100..=130).contains(&lost));
    assert!(out.frames[lost as usize..].iter().all(|f| !f.tracked_ok));
}

#[test]
fn dr_only_reproduces_odometry() {
    let (seq, base) = corridor(200);
    let out = run_sequence(&seq, &with_mode(&base, Mode::DrOnly));
    assert!(out.map.keyframes.is_empty());
    for (r, f) in out.frames.iter().zip(&seq.frames) {
        assert!((r.pose.translation() - f.odom.translation()).norm() < 1e-9);
        assert!(r.pose.rotation().angle_to(f.odom.rotation()) < 1e-9);
    }
}

#[test]
fn covisibility_stays_symmetric_after_every_keyframe() {
    let (seq, base) = corridor(150);
    let mut p = Pipeline::new(with_mode(&base, Mode::Adaptive), seq.camera);
    let mut keyframes = 0;
    for f in &seq.frames {
        if p.step(f, &seq).keyframe.is_some() {
            keyframes += 1;
            let map = p.map();
            assert!(map.covisibility_consistent());
            for (&i, kf) in &map.keyframes {
                for (&j, &w) in &kf.covisibility {
                    assert_eq!(map.keyframes[&j].covisibility.get(&i), Some(&w));
                }
            }
        }
    }
    assert!(keyframes > 5);
}

#[test]
fn runs_are_deterministic() {
    let (seq, base) = corridor(150);
    let c = with_mode(&base, Mode::Adaptive);
    let a = run_sequence(&seq, &c);
    let b = run_sequence(&seq, &c);
    assert_eq!(a, b);
    assert_eq!(serialize_map(&a.map), serialize_map(&b.map));
}

#[test]
fn map_text_round_trips() {
    let (seq, base) = corridor(150);
    let out = run_sequence(&seq, &with_mode(&base, Mode::Adaptive));
    let text = serialize_map(&out.map);
    let back = parse_map(&text, "map.gwmap").unwrap();
    assert_eq!(serialize_map(&back), text);
    assert_eq!(back.keyframes.len(), out.map.keyframes.len());
    assert_eq!(back.points.len(), out.map.points.len());
    assert_eq!(back.dr_edges.len(), out.map.dr_edges.len());
    assert!(back.covisibility_consistent());
}

#[test]
fn truncated_map_is_a_format_error() {
    let (seq, base) = corridor(100);
    let out = run_sequence(&seq, &with_mode(&base, Mode::Adaptive));
    let text = serialize_map(&out.map);
    let lines: Vec<&str> = text.lines().collect();
    let cut = lines[..lines.len() / 2].join("\n");
    let err = parse_map(&cut, "map.gwmap").unwrap_err();
    assert_eq!(err.file, "map.gwmap");
    assert!(parse_map("", "m").is_err());
    assert!(parse_map("garbage\n", "m").is_err());
}

#[test]
fn loop_oracle_fires_on_the_rectangle() {
    let c = preset_config("rectangle_loop");
    let seq = generate_sequence(&c.world).unwrap();
    let out = run_sequence(&seq, &c.slam);
    assert!(!out.loops.is_empty());
    let ev = &out.loops[0];
    assert!(ev.to >= ev.from + c.slam.loop_gap_min as u64);
    assert!(out.map.loop_edges.iter().any(|e| e.from == ev.from && e.to == ev.to));
    assert_eq!(ev.before.len(), ev.after.len());

    let mut off = c.slam.clone();
    off.loop_enabled = false;
    assert!(run_sequence(&seq, &off).loops.is_empty());
}
