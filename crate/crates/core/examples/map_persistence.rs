//! Builds a map on a short corridor run, saves it, loads it back and keeps
//! tracking on the loaded map.

use drslam::config::{preset, RunConfig};
use drslam::sim::generate_sequence;
use drslam::slam::{load_map, run_sequence, save_map, Pipeline};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = RunConfig::parse_str(preset("corridor_gap").unwrap())?;
    config.set("frames", "150")?;
    config.set("dropouts", "")?;
    let seq = generate_sequence(&config.world)?;
    let first = seq.segment(0, 100);
    let out = run_sequence(&first, &config.slam);

    let path = std::env::temp_dir().join("drslam_example.gwmap");
    save_map(&out.map, &path)?;
    let map = load_map(&path)?;
    println!(
        "saved and reloaded {} keyframes, {} points, {} DR edges",
        map.keyframes.len(),
        map.points.len(),
        map.dr_edges.len()
    );

    let mut p = Pipeline::with_map(config.slam.clone(), map);
    for f in &seq.frames[100..] {
        p.step(f, &seq);
    }
    let tracked = p.frames().iter().filter(|f| f.tracked_ok).count();
    println!("continued for {} frames, {} tracked", p.frames().len(), tracked);
    Ok(())
}
