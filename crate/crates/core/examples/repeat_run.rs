//! Drives a closed path three times without resetting the map and compares
//! frame and keyframe accuracy per loop for adaptive and
//! data-association-only weighting.

use drslam::config::{preset, RunConfig};
use drslam::eval::repeat_run;
use drslam::sim::generate_sequence;
use drslam::slam::{Mode, SlamConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = RunConfig::parse_str(preset("two_lap").unwrap())?;
    let base = generate_sequence(&config.world)?;
    for mode in [Mode::Adaptive, Mode::DaOnly] {
        let (rows, _) = repeat_run(&base, config.experiment.loops, &SlamConfig { mode, ..config.slam.clone() })?;
        for r in rows {
            println!(
                "{:<9} loop {}: frame {:.4} m  keyframe {:.4} m  ratio {}",
                mode.as_str(),
                r.index,
                r.frame_rmse,
                r.keyframe_rmse,
                r.ratio.map_or("n/a".into(), |x| format!("{x:.3}"))
            );
        }
    }
    Ok(())
}
