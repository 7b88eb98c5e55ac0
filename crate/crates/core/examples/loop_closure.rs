//! Loop closure on a rectangle driven with biased odometry: keyframe error
//! before and after global adjustment.

use drslam::config::{preset, RunConfig};
use drslam::eval::{ape_rmse, ground_truth};
use drslam::sim::generate_sequence;
use drslam::slam::run_sequence;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = RunConfig::parse_str(preset("rectangle_loop").unwrap())?;
    let seq = generate_sequence(&config.world)?;
    let gt = ground_truth(&seq);
    let out = run_sequence(&seq, &config.slam);
    for ev in &out.loops {
        println!(
            "loop keyframe {} -> {} at frame {}: keyframe APE {:.3} m -> {:.3} m",
            ev.from,
            ev.to,
            ev.frame,
            ape_rmse(&ev.before, &gt)?,
            ape_rmse(&ev.after, &gt)?
        );
    }
    println!("final frame APE {:.3} m", ape_rmse(&out.frame_trajectory(), &gt)?);
    Ok(())
}
