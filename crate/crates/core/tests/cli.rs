use std::fs;
use std::path::Path;

use drslam::cli::{run_cli, CONFIG_ECHO, EXIT_FAILED_RUN, EXIT_OK, EXIT_USAGE};
use drslam::eval::read_tum;

fn cli(args: &[&str]) -> i32 {
    let mut v = vec!["drslam"];
    v.extend_from_slice(args);
    run_cli(v)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn metric(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key} in metrics"))
}

const SMALL: [&str; 4] = ["--set", "frames=120", "--set", "dropouts=50:80:0"];

#[test]
fn simulate_then_run_then_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let (seq, run, ev) = (tmp.path().join("seq"), tmp.path().join("run"), tmp.path().join("eval"));
    let mut args = vec!["simulate", "--config", "corridor_gap", "--seed", "4", "--out", p(&seq)];
    args.extend_from_slice(&SMALL);
    assert_eq!(cli(&args), EXIT_OK);
    for f in ["meta", "gt.tum", "odom.tum", "obs.csv", "stats.csv", "world.csv", CONFIG_ECHO] {
        assert!(seq.join(f).exists(), "{f}");
    }

    assert_eq!(cli(&["run", "--config", "corridor_gap", "--seq", p(&seq), "--out", p(&run)]), EXIT_OK);
    let log = fs::read_to_string(run.join("run_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 120);
    assert!(log.starts_with("frame_id,timestamp,quality,alpha,n_det,n_trk,iterations,tracked_ok,keyframe\n"));
    assert_eq!(metric(&run, "frames"), "120");
    assert_eq!(metric(&run, "completed"), "true");

    assert_eq!(cli(&["eval", "--run", p(&run), "--seq", p(&seq), "--out", p(&ev)]), EXIT_OK);
    assert_eq!(metric(&ev, "rmse"), metric(&run, "rmse"));
    let errors = fs::read_to_string(ev.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().next(), Some("frame_id,err_m"));
    assert_eq!(errors.lines().count(), 1 + 120);
}

#[test]
fn vision_only_run_fails_with_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--config", "corridor_gap", "--mode", "vision-only", "--out", p(tmp.path())];
    args.extend_from_slice(&SMALL);
    assert_eq!(cli(&args), EXIT_FAILED_RUN);
    assert_eq!(metric(tmp.path(), "completed"), "false");
}

#[test]
fn dr_only_run_reproduces_odometry() {
    let tmp = tempfile::tempdir().unwrap();
    let (seq, run) = (tmp.path().join("seq"), tmp.path().join("run"));
    let mut args = vec!["simulate", "--config", "corridor_gap", "--out", p(&seq)];
    args.extend_from_slice(&SMALL);
    assert_eq!(cli(&args), EXIT_OK);
    cli(&["run", "--config", "corridor_gap", "--seq", p(&seq), "--mode", "dr-only", "--out", p(&run)]);
    let est = read_tum(&run.join("est_frames.tum")).unwrap();
    let odom = read_tum(&seq.join("odom.tum")).unwrap();
    assert_eq!(est.len(), odom.len());
    for ((ta, a), (tb, b)) in est.samples().iter().zip(odom.samples()) {
        assert_eq!(ta, tb);
        assert!((a.translation() - b.translation()).norm() < 1e-9);
    }
}

#[test]
fn eval_of_identical_files_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = tmp.path().join("seq");
    let mut args = vec!["simulate", "--config", "corridor_gap", "--out", p(&seq)];
    args.extend_from_slice(&SMALL);
    cli(&args);
    let gt = seq.join("gt.tum");
    let out = tmp.path().join("e");
    assert_eq!(cli(&["eval", "--est", p(&gt), "--reference", p(&gt), "--out", p(&out)]), EXIT_OK);
    assert!(metric(&out, "rmse").parse::<f64>().unwrap() < 1e-9);
}

#[test]
fn sweep_writes_six_weights_by_five_repeats() {
    let tmp = tempfile::tempdir().unwrap();
    let code = cli(&[
        "sweep", "--config", "corridor_gap", "--set", "frames=40", "--set", "dropouts=",
        "--set", "segments=", "--alphas=-2,-1,0,1,2,3", "--repeats", "5", "--jobs", "2",
        "--out", p(tmp.path()),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("log_alpha,repeat,rmse,median"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 30);
    assert_eq!(rows[0][0], "-2");
    assert_eq!(rows[29][0], "3");
    assert_eq!(rows[29][1], "4");
}

#[test]
fn repeat_writes_one_row_per_loop_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let code = cli(&[
        "repeat", "--config", "two_lap", "--set", "frames=81", "--loops", "3", "--repeats", "2",
        "--out", p(tmp.path()),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(tmp.path().join("loops.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("seed,loop,frame_rmse,keyframe_rmse,ratio"));
    assert_eq!(text.lines().count(), 1 + 6);
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = p(tmp.path());
    assert_eq!(cli(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(cli(&["run", "--config", "no_such_preset", "--out", out]), EXIT_USAGE);
    assert_eq!(cli(&["run", "--config", "corridor_gap", "--set", "framez=3", "--out", out]), EXIT_USAGE);
    assert_eq!(cli(&["run", "--config", "corridor_gap", "--mode", "psychic", "--out", out]), EXIT_USAGE);
    assert_eq!(cli(&["repeat", "--config", "two_lap", "--loops", "1", "--out", out]), EXIT_USAGE);
    assert_eq!(cli(&["eval", "--out", out]), EXIT_USAGE);
}

#[test]
fn missing_sequence_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let code = cli(&["run", "--config", "corridor_gap", "--seq", p(&missing), "--out", p(tmp.path())]);
    assert_eq!(code, EXIT_FAILED_RUN);
}

#[test]
fn config_echo_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut args = vec!["run", "--config", "corridor_gap", "--seed", "9", "--out", p(&a)];
    args.extend_from_slice(&SMALL);
    cli(&args);
    let echo = a.join(CONFIG_ECHO);
    cli(&["run", "--config", p(&echo), "--out", p(&b)]);
    for f in ["est_frames.tum", "est_keyframes.tum", "run_log.csv", "map.gwmap", "metrics.csv", CONFIG_ECHO] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
