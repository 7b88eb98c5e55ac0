//! Generates the corridor scenario and writes it as a sequence directory.
//!
//! Usage: `cargo run --example simulate_sequence [out_dir]`

use drslam::config::{preset, RunConfig};
use drslam::sim::{generate_sequence, read_sequence, write_sequence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("drslam_corridor"), Into::into);
    let config = RunConfig::parse_str(preset("corridor_gap").unwrap())?;
    let seq = generate_sequence(&config.world)?;
    write_sequence(&seq, &out)?;
    let back = read_sequence(&out)?;
    let dets: usize = back.frames.iter().map(|f| f.n_det).sum();
    println!(
        "{} frames, {} landmarks, {:.1} detections per frame written to {}",
        back.frames.len(),
        back.landmarks.len(),
        dets as f64 / back.frames.len() as f64,
        out.display()
    );
    Ok(())
}
