//! Trajectory accuracy metrics and experiment harnesses.

mod ape;
mod harness;
mod trajectory;

pub use ape::{
    align, ape_errors, ape_rmse, associate, frame_kf_ratio, verdict, PoseError, RunVerdict, MAX_RMSE,
    MIN_RATIO_DENOMINATOR, MIN_TRACKING_RATIO,
};
pub use harness::{
    alpha_sweep, evaluate_run, format_errors_csv, format_loops_csv, format_metrics_csv,
    format_sweep_csv, ground_truth, loop_bounds, median, repeat_run, repeat_sequences, run_all,
    with_jobs, LoopRow, SweepRow,
};
pub use trajectory::{format_tum, format_tum_line, parse_tum, read_tum, write_tum, Trajectory};
