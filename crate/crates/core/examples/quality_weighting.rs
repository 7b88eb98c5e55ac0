//! Tracking quality from feature counts and the DR weight it selects.

use drslam::quality::{compute_quality, dr_weight, QualityParams, TrackingStats, WeightBounds};

fn main() {
    let params = QualityParams::default();
    let bounds = WeightBounds::default();
    println!("{:>6} {:>6} {:>8} {:>10}", "n_det", "n_trk", "quality", "alpha");
    for (det, trk) in [(800, 150), (600, 120), (450, 80), (300, 60), (150, 20), (40, 3), (0, 0)] {
        let q = compute_quality(TrackingStats::new(det, trk), &params);
        println!("{det:>6} {trk:>6} {q:>8.3} {:>10.3}", dr_weight(q, &bounds));
    }
}
