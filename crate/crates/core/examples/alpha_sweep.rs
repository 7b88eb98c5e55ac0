//! Fixed-weight sweep on the well-textured and poorly textured stretches
//! of the corridor, next to vision-only and DR-only baselines.

use drslam::config::{preset, RunConfig};
use drslam::eval::{alpha_sweep, median, repeat_sequences, run_all};
use drslam::slam::{Mode, SlamConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = RunConfig::parse_str(preset("corridor_gap").unwrap())?;
    let x = &config.experiment;
    for seg in &x.segments {
        let seqs = repeat_sequences(&config.world, Some((seg.start, seg.end)), 3)?;
        let baseline = |mode| {
            let runs = run_all(&seqs, &SlamConfig { mode, ..config.slam.clone() });
            median(&runs.iter().map(|v| v.rmse).collect::<Vec<_>>())
        };
        println!(
            "{} frames {}..{}: vision-only {:.4} m, dr-only {:.4} m",
            seg.name,
            seg.start,
            seg.end,
            baseline(Mode::VisionOnly),
            baseline(Mode::DrOnly)
        );
        for row in alpha_sweep(&seqs, &config.slam, &x.log_alphas) {
            println!("  log alpha {:+}  median rmse {:.4} m", row.log_alpha, row.median);
        }
    }
    Ok(())
}
