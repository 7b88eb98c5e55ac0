use std::fmt::Write as _;

use rayon::prelude::*;

use super::ape::{ape_errors, ape_rmse, frame_kf_ratio, verdict, RunVerdict};
use super::Trajectory;
use crate::error::{EvalError, SimError};
use crate::sim::{generate_sequence, Sequence, WorldConfig};
use crate::slam::{run_sequence, Mode, Pipeline, RunOutput, SlamConfig};

/// Ground-truth trajectory of a simulated sequence. Frames without ground
/// truth are skipped.
pub fn ground_truth(seq: &Sequence) -> Trajectory {
    let mut t = Trajectory::new();
    for f in &seq.frames {
        if let Some(g) = f.gt {
            t.push(f.timestamp, g);
        }
    }
    t
}

/// Frame-trajectory verdict of a finished run.
pub fn evaluate_run(out: &RunOutput, seq: &Sequence) -> RunVerdict {
    let v = verdict(&out.frame_trajectory(), &ground_truth(seq), &out.tracked_flags());
    RunVerdict {
        completed: v.completed && out.completed(),
        ..v
    }
}

/// Median; the mean of the two middle values for even lengths. NaN when
/// empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Runs `f` on a pool of `jobs` threads; 0 keeps the global pool.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// One sequence per repeat, seeded `world.seed + repeat` and cut to
/// `segment` when given.
pub fn repeat_sequences(
    world: &WorldConfig,
    segment: Option<(usize, usize)>,
    repeats: usize,
) -> Result<Vec<Sequence>, SimError> {
    (0..repeats)
        .into_par_iter()
        .map(|r| {
            let mut w = world.clone();
            w.seed = world.seed.wrapping_add(r as u64);
            let seq = generate_sequence(&w)?;
            Ok(match segment {
                Some((a, b)) => seq.segment(a, b),
                None => seq,
            })
        })
        .collect()
}

/// Verdict of `config` on each sequence.
pub fn run_all(seqs: &[Sequence], config: &SlamConfig) -> Vec<RunVerdict> {
    seqs.par_iter()
        .map(|s| evaluate_run(&run_sequence(s, config), s))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub log_alpha: f64,
    /// One verdict per repeat, in repeat order.
    pub runs: Vec<RunVerdict>,
    /// Median frame RMSE over repeats; incomplete runs keep their RMSE.
    pub median: f64,
}

/// Fixed-weight runs with `alpha = 10^log_alpha` on every sequence.
/// Rows follow `log_alphas` order.
pub fn alpha_sweep(seqs: &[Sequence], base: &SlamConfig, log_alphas: &[f64]) -> Vec<SweepRow> {
    let jobs: Vec<(usize, usize)> = (0..log_alphas.len())
        .flat_map(|a| (0..seqs.len()).map(move |r| (a, r)))
        .collect();
    let results: Vec<RunVerdict> = jobs
        .par_iter()
        .map(|&(a, r)| {
            let mut c = base.clone();
            c.mode = Mode::FixedDr;
            c.fixed_alpha = 10f64.powf(log_alphas[a]);
            evaluate_run(&run_sequence(&seqs[r], &c), &seqs[r])
        })
        .collect();
    log_alphas
        .iter()
        .enumerate()
        .map(|(a, &log_alpha)| {
            let runs: Vec<RunVerdict> = results[a * seqs.len()..(a + 1) * seqs.len()].to_vec();
            let rmse: Vec<f64> = runs.iter().map(|v| v.rmse).collect();
            SweepRow {
                log_alpha,
                median: median(&rmse),
                runs,
            }
        })
        .collect()
}

pub fn format_sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("log_alpha,repeat,rmse,median\n");
    for row in rows {
        for (r, v) in row.runs.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", row.log_alpha, r, v.rmse, row.median);
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopRow {
    /// 1-based loop index.
    pub index: usize,
    pub frame_rmse: f64,
    /// Keyframe RMSE of the whole map as it stands at the end of the loop.
    pub keyframe_rmse: f64,
    /// Frame over keyframe RMSE; `None` when keyframes are error-free.
    pub ratio: Option<f64>,
}

/// First frame index of every loop of `base.repeated(loops)`, plus the end.
pub fn loop_bounds(frames_per_loop: usize, loops: usize) -> Vec<usize> {
    let mut b = vec![0];
    for k in 0..loops {
        let len = if k == 0 { frames_per_loop } else { frames_per_loop.saturating_sub(1) };
        b.push(b[k] + len);
    }
    b
}

/// Plays `base` `loops` times through one pipeline whose map is never
/// reset and scores every loop separately.
pub fn repeat_run(
    base: &Sequence,
    loops: usize,
    config: &SlamConfig,
) -> Result<(Vec<LoopRow>, RunOutput), EvalError> {
    if loops < 2 {
        return Err(EvalError::TooFewLoops { loops });
    }
    let seq = base.repeated(loops);
    let gt = ground_truth(&seq);
    let bounds = loop_bounds(base.frames.len(), loops);
    let mut p = Pipeline::new(config.clone(), seq.camera);
    let mut rows = Vec::with_capacity(loops);
    for k in 0..loops {
        for f in &seq.frames[bounds[k]..bounds[k + 1]] {
            p.step(f, &seq);
        }
        let mut frames = Trajectory::new();
        for r in &p.frames()[bounds[k]..bounds[k + 1]] {
            frames.push(r.timestamp, r.pose);
        }
        let mut kfs = Trajectory::new();
        for kf in p.map().keyframes.values() {
            kfs.push(kf.timestamp, kf.pose);
        }
        let frame_rmse = ape_rmse(&frames, &gt)?;
        let keyframe_rmse = ape_rmse(&kfs, &gt)?;
        rows.push(LoopRow {
            index: k + 1,
            frame_rmse,
            keyframe_rmse,
            ratio: frame_kf_ratio(&frames, &kfs, &gt).ok(),
        });
    }
    Ok((rows, p.finish()))
}

pub fn format_loops_csv(rows: &[(u64, Vec<LoopRow>)]) -> String {
    let mut s = String::from("seed,loop,frame_rmse,keyframe_rmse,ratio\n");
    for (seed, loops) in rows {
        for l in loops {
            let ratio = l.ratio.map_or("nan".to_string(), |r| r.to_string());
            let _ = writeln!(
                s,
                "{seed},{},{},{},{ratio}",
                l.index, l.frame_rmse, l.keyframe_rmse
            );
        }
    }
    s
}

pub fn format_metrics_csv(metrics: &[(&str, String)]) -> String {
    let mut s = String::from("metric,value\n");
    for (k, v) in metrics {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

/// Per-sample aligned position errors as `frame_id,err_m`, where the frame id
/// is the index of the estimate sample.
pub fn format_errors_csv(est: &Trajectory, reference: &Trajectory) -> Result<String, EvalError> {
    let mut s = String::from("frame_id,err_m\n");
    for e in ape_errors(est, reference)? {
        let _ = writeln!(s, "{},{}", e.index, e.error);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn loop_bounds_skip_the_shared_frame() {
        assert_eq!(loop_bounds(10, 3), vec![0, 10, 19, 28]);
    }

    #[test]
    fn one_loop_is_rejected() {
        let seq = Sequence::default();
        let r = repeat_run(&seq, 1, &SlamConfig::default());
        assert_eq!(r.err(), Some(EvalError::TooFewLoops { loops: 1 }));
    }
}
