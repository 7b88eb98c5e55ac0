//! Command-line front end.
//!
//! ```text
//! drslam simulate --config corridor_gap --out seq/
//! drslam run      --config corridor_gap --seq seq/ --mode vision-only --out run/
//! drslam sweep    --config corridor_gap --alphas=-2,-1,0,1,2,3 --repeats 5
//! drslam repeat   --config two_lap --loops 3
//! drslam eval     --run run/ --seq seq/
//! ```
//!
//! `--config` takes a file or the name of a bundled preset. Outputs go to
//! `--out`, defaulting to `$GW_OUT_DIR/<command>` (or `out/<command>`). Every
//! output directory receives `config.cfg`, the resolved configuration.
//!
//! Exit codes: 0 success, 1 failed run verdict, 2 usage or configuration
//! error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::eval::{
    alpha_sweep, evaluate_run, format_errors_csv, format_loops_csv, format_metrics_csv,
    format_sweep_csv, format_tum, frame_kf_ratio, ground_truth, read_tum, repeat_run,
    repeat_sequences, verdict, with_jobs, Trajectory,
};
use crate::sim::{generate_sequence, read_sequence, write_sequence, Sequence};
use crate::slam::{run_sequence, serialize_map, Mode, RunOutput};

pub const OUT_DIR_ENV: &str = "GW_OUT_DIR";
pub const CONFIG_ECHO: &str = "config.cfg";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_RUN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "drslam", version, about = "Visual SLAM with quality-weighted dead-reckoning priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic sequence directory.
    Simulate(Common),
    /// Run the pipeline on one sequence.
    Run(Common),
    /// Fixed-weight sweep over log10 weights, repeated over seeds.
    Sweep(Common),
    /// Play a sequence several times without resetting the map.
    Repeat(Common),
    /// Score an estimated trajectory against a reference.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file or bundled preset name.
    #[arg(long)]
    pub config: Option<String>,
    /// Sequence directory; generated from the config when absent.
    #[arg(long)]
    pub seq: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub loops: Option<usize>,
    /// Comma-separated log10 weights.
    #[arg(long, allow_hyphen_values = true)]
    pub alphas: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Extra `key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimated trajectory in TUM format.
    #[arg(long)]
    pub est: Option<PathBuf>,
    /// Reference trajectory in TUM format.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Run directory; supplies the estimate, keyframes and tracking flags.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Sequence directory; its ground truth is the reference.
    #[arg(long)]
    pub seq: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `args` (including the program name) and executes the command.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_FAILED_RUN
        }
    }
}

fn execute(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Simulate(a) => simulate(&a),
        Command::Run(a) => run(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Repeat(a) => repeat(&a),
        Command::Eval(a) => eval(&a),
    }
}

fn out_dir(flag: &Option<PathBuf>, command: &str) -> PathBuf {
    match flag {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map_or_else(|| PathBuf::from("out"), PathBuf::from)
            .join(command),
    }
}

fn resolve(a: &Common) -> Result<RunConfig, Failure> {
    let mut c = RunConfig::resolve(a.config.as_deref(), &a.set).map_err(|e| usage(e.to_string()))?;
    let mut flags: Vec<String> = Vec::new();
    if let Some(m) = a.mode {
        flags.push(format!("mode={m}"));
    }
    if let Some(s) = a.seed {
        flags.push(format!("seed={s}"));
    }
    if let Some(p) = &a.seq {
        flags.push(format!("sequence={}", p.display()));
    }
    if let Some(l) = a.loops {
        flags.push(format!("loops={l}"));
    }
    if let Some(x) = &a.alphas {
        flags.push(format!("log_alphas={x}"));
    }
    if let Some(r) = a.repeats {
        flags.push(format!("repeats={r}"));
    }
    if let Some(j) = a.jobs {
        flags.push(format!("jobs={j}"));
    }
    for f in &flags {
        c.apply_override(f).map_err(|e| usage(e.to_string()))?;
    }
    c.validate().map_err(|e| usage(e.to_string()))?;
    Ok(c)
}

fn prepare_out(dir: &Path, config: &RunConfig) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    write_file(&dir.join(CONFIG_ECHO), &config.echo())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_or_generate(config: &RunConfig) -> Result<Sequence, Failure> {
    match &config.sequence {
        Some(dir) => Ok(read_sequence(dir)?),
        None => Ok(generate_sequence(&config.world)?),
    }
}

fn with_world_meta(mut seq: Sequence, config: &RunConfig) -> Sequence {
    seq.meta = config
        .entries()
        .into_iter()
        .filter(|(section, key, _)| *section == "world" || *key == "seed")
        .map(|(_, key, value)| (format!("world.{key}"), value))
        .collect();
    seq
}

fn simulate(a: &Common) -> Result<i32, Failure> {
    let config = resolve(a)?;
    let out = out_dir(&a.out, "simulate");
    let seq = with_world_meta(generate_sequence(&config.world)?, &config);
    prepare_out(&out, &config)?;
    write_sequence(&seq, &out)?;
    println!("wrote {} frames to {}", seq.frames.len(), out.display());
    Ok(EXIT_OK)
}

/// One `run_log.csv` row per input frame.
pub fn format_run_log(out: &RunOutput) -> String {
    let mut s = String::from("frame_id,timestamp,quality,alpha,n_det,n_trk,iterations,tracked_ok,keyframe\n");
    for f in &out.frames {
        let alpha = f.alpha.map_or(String::new(), |a| a.to_string());
        let kf = f.keyframe.map_or(String::new(), |k| k.to_string());
        let _ = writeln!(
            s,
            "{},{},{},{alpha},{},{},{},{},{kf}",
            f.id,
            f.timestamp,
            f.quality,
            f.stats.n_det,
            f.stats.n_trk,
            f.iterations,
            u8::from(f.tracked_ok)
        );
    }
    s
}

fn parse_tracked_flags(text: &str) -> Result<Vec<bool>, Failure> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = header
        .iter()
        .position(|h| *h == "tracked_ok")
        .ok_or_else(|| Failure::Runtime("run_log.csv has no tracked_ok column".into()))?;
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| match l.split(',').nth(col) {
            Some("1") => Ok(true),
            Some("0") => Ok(false),
            _ => Err(Failure::Runtime(format!("run_log.csv:{}: bad tracked_ok", i + 2))),
        })
        .collect()
}

fn run(a: &Common) -> Result<i32, Failure> {
    let config = resolve(a)?;
    let seq = load_or_generate(&config)?;
    let out = out_dir(&a.out, "run");
    let result = run_sequence(&seq, &config.slam);
    prepare_out(&out, &config)?;
    write_file(&out.join("est_frames.tum"), &format_tum(&result.frame_trajectory()))?;
    write_file(&out.join("est_keyframes.tum"), &format_tum(&result.keyframe_trajectory()))?;
    write_file(&out.join("run_log.csv"), &format_run_log(&result))?;
    write_file(&out.join("map.gwmap"), &serialize_map(&result.map))?;
    if let Some(f) = result.lost_at {
        eprintln!("tracking lost at frame {f}");
    }
    if !seq.has_geometry() {
        return Ok(if result.completed() { EXIT_OK } else { EXIT_FAILED_RUN });
    }
    let v = evaluate_run(&result, &seq);
    let gt = ground_truth(&seq);
    let mut metrics = vec![
        ("frames", result.frames.len().to_string()),
        ("keyframes", result.map.keyframes.len().to_string()),
        ("loops", result.loops.len().to_string()),
        ("rmse", v.rmse.to_string()),
        ("tracking_ratio", v.tracking_ratio.to_string()),
        ("completed", v.completed.to_string()),
    ];
    if let Ok(r) = frame_kf_ratio(&result.frame_trajectory(), &result.keyframe_trajectory(), &gt) {
        metrics.push(("frame_kf_ratio", r.to_string()));
    }
    write_file(&out.join("metrics.csv"), &format_metrics_csv(&metrics))?;
    println!(
        "{}: rmse {:.4} m, tracking ratio {:.3}, {}",
        config.slam.mode,
        v.rmse,
        v.tracking_ratio,
        if v.completed { "completed" } else { "failed" }
    );
    Ok(if v.completed { EXIT_OK } else { EXIT_FAILED_RUN })
}

fn sweep(a: &Common) -> Result<i32, Failure> {
    let config = resolve(a)?;
    let out = out_dir(&a.out, "sweep");
    let x = &config.experiment;
    let mut targets: Vec<(String, Option<(usize, usize)>)> = x
        .segments
        .iter()
        .map(|g| (format!("sweep_{}.csv", g.name), Some((g.start, g.end))))
        .collect();
    if targets.is_empty() {
        targets.push(("sweep.csv".into(), None));
    }
    prepare_out(&out, &config)?;
    for (file, segment) in targets {
        let rows = with_jobs(x.jobs, || -> Result<_, Failure> {
            let seqs = match &config.sequence {
                Some(dir) => {
                    let s = read_sequence(dir)?;
                    let s = match segment {
                        Some((a, b)) => s.segment(a, b),
                        None => s,
                    };
                    vec![s; x.repeats]
                }
                None => repeat_sequences(&config.world, segment, x.repeats)?,
            };
            Ok(alpha_sweep(&seqs, &config.slam, &x.log_alphas))
        })?;
        write_file(&out.join(&file), &format_sweep_csv(&rows))?;
        for r in &rows {
            println!("{file}: log_alpha {:+} median rmse {:.4}", r.log_alpha, r.median);
        }
    }
    Ok(EXIT_OK)
}

fn repeat(a: &Common) -> Result<i32, Failure> {
    let config = resolve(a)?;
    let out = out_dir(&a.out, "repeat");
    let x = &config.experiment;
    if x.loops < 2 {
        return Err(usage("repeat needs --loops >= 2"));
    }
    let rows = with_jobs(x.jobs, || -> Result<_, Failure> {
        use rayon::prelude::*;
        let seqs: Vec<(u64, Sequence)> = match &config.sequence {
            Some(dir) => vec![(config.world.seed, read_sequence(dir)?)],
            None => repeat_sequences(&config.world, None, x.repeats)?
                .into_iter()
                .enumerate()
                .map(|(i, s)| (config.world.seed.wrapping_add(i as u64), s))
                .collect(),
        };
        seqs.par_iter()
            .map(|(seed, s)| Ok((*seed, repeat_run(s, x.loops, &config.slam)?.0)))
            .collect::<Result<Vec<_>, Failure>>()
    })?;
    prepare_out(&out, &config)?;
    write_file(&out.join("loops.csv"), &format_loops_csv(&rows))?;
    for (seed, loops) in &rows {
        for l in loops {
            println!(
                "seed {seed} loop {}: frame rmse {:.4}, keyframe rmse {:.4}, ratio {}",
                l.index,
                l.frame_rmse,
                l.keyframe_rmse,
                l.ratio.map_or("n/a".into(), |r| format!("{r:.3}"))
            );
        }
    }
    Ok(EXIT_OK)
}

fn eval(a: &EvalArgs) -> Result<i32, Failure> {
    let est_path = match (&a.est, &a.run) {
        (Some(p), _) => p.clone(),
        (None, Some(r)) => r.join("est_frames.tum"),
        (None, None) => return Err(usage("eval needs --est or --run")),
    };
    let ref_path = match (&a.reference, &a.seq) {
        (Some(p), _) => p.clone(),
        (None, Some(s)) => s.join("gt.tum"),
        (None, None) => return Err(usage("eval needs --reference or --seq")),
    };
    let est = read_tum(&est_path)?;
    let reference = read_tum(&ref_path)?;
    let tracked = match &a.run {
        Some(r) if r.join("run_log.csv").exists() => {
            let p = r.join("run_log.csv");
            parse_tracked_flags(&std::fs::read_to_string(&p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?)?
        }
        _ => vec![true; est.len()],
    };
    let v = verdict(&est, &reference, &tracked);
    let mut metrics = vec![
        ("samples", est.len().to_string()),
        ("rmse", v.rmse.to_string()),
        ("tracking_ratio", v.tracking_ratio.to_string()),
        ("completed", v.completed.to_string()),
    ];
    let keyframes: Option<Trajectory> = match &a.run {
        Some(r) if r.join("est_keyframes.tum").exists() => Some(read_tum(&r.join("est_keyframes.tum"))?),
        _ => None,
    };
    if let Some(k) = &keyframes {
        if let Ok(r) = crate::eval::ape_rmse(k, &reference) {
            metrics.push(("keyframe_rmse", r.to_string()));
        }
        if let Ok(r) = frame_kf_ratio(&est, k, &reference) {
            metrics.push(("frame_kf_ratio", r.to_string()));
        }
    }
    let out = out_dir(&a.out, "eval");
    std::fs::create_dir_all(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    write_file(&out.join("metrics.csv"), &format_metrics_csv(&metrics))?;
    if let Ok(errors) = format_errors_csv(&est, &reference) {
        write_file(&out.join("errors.csv"), &errors)?;
    }
    println!(
        "rmse {:.6} m, tracking ratio {:.3}, {}",
        v.rmse,
        v.tracking_ratio,
        if v.completed { "completed" } else { "failed" }
    );
    Ok(if v.completed { EXIT_OK } else { EXIT_FAILED_RUN })
}
