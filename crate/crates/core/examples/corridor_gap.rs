//! Every pipeline mode on a corridor with a 30-frame texture-less gap.

use drslam::config::{preset, RunConfig};
use drslam::eval::evaluate_run;
use drslam::sim::generate_sequence;
use drslam::slam::{run_sequence, Mode, SlamConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = RunConfig::parse_str(preset("corridor_gap").unwrap())?;
    let seq = generate_sequence(&config.world)?;
    for mode in Mode::ALL {
        let out = run_sequence(&seq, &SlamConfig { mode, ..config.slam.clone() });
        let v = evaluate_run(&out, &seq);
        let lost = out.lost_at.map_or(String::new(), |f| format!(", lost at frame {f}"));
        println!(
            "{:<12} rmse {:>8.4} m  tracked {:>5.1}%  keyframes {:>3}{lost}",
            mode.as_str(),
            v.rmse,
            100.0 * v.tracking_ratio,
            out.map.keyframes.len()
        );
    }
    Ok(())
}
