use drslam::quality::{
    compute_quality, dr_weight, keyframe_quality, scale_information, smooth_window_weights,
    ConnectionReference, NominalDrInformation, QualityParams, TrackingStats, WeightBounds,
};
use proptest::prelude::*;

/// Least-squares line through `(x, y)` samples; returns the largest residual.
pub fn line_fit_residual(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (y - (my + slope * (x - mx))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn log_weight_is_affine_in_quality() {
    let b = WeightBounds::default();
    let qs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let la: Vec<f64> = qs.iter().map(|&q| dr_weight(q, &b).ln()).collect();
    assert!(line_fit_residual(&qs, &la) < 1e-12);
}

#[test]
fn weight_examples() {
    let b = WeightBounds::default();
    assert!((dr_weight(1.0, &b) - 0.1).abs() < 1e-12);
    assert!((dr_weight(0.0, &b) - 1000.0).abs() < 1e-9);
    assert!((dr_weight(0.5, &b) - 10.0).abs() < 1e-12);
}

#[test]
fn connection_reference_tracks_well_tracked_median() {
    let mut c = ConnectionReference::new(20.0, 0.8, 4);
    assert_eq!(c.update(&[(0.5, 100.0)]), 20.0);
    assert_eq!(c.update(&[(0.9, 10.0), (0.9, 30.0), (0.2, 99.0)]), 20.0);
    assert_eq!(c.update(&[(0.9, 1.0), (0.9, 50.0), (0.9, 40.0), (0.9, 30.0), (0.9, 20.0)]), 35.0);
}

proptest! {
    #[test]
    fn quality_in_unit_interval_and_monotone(
        det in 0usize..2000, trk in 0usize..2000, dd in 0usize..200, dt in 0usize..200
    ) {
        let p = QualityParams::default();
        let trk = trk.min(det);
        let q = compute_quality(TrackingStats::new(det, trk), &p);
        prop_assert!((0.0..=1.0).contains(&q));
        let q_det = compute_quality(TrackingStats::new(det + dd, trk), &p);
        let q_trk = compute_quality(TrackingStats::new(det + dt, trk + dt), &p);
        prop_assert!(q_det >= q);
        prop_assert!(q_trk >= q);
    }

    #[test]
    fn weight_strictly_decreasing_and_bounded(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assume!(a < b);
        let w = WeightBounds::default();
        let (wa, wb) = (dr_weight(a, &w), dr_weight(b, &w));
        prop_assert!(wa > wb);
        prop_assert!(w.contains(wa) && w.contains(wb));
    }

    #[test]
    fn weight_is_continuous(q in 0.0f64..1.0) {
        let w = WeightBounds::default();
        let h = 1e-9;
        let d = (dr_weight((q + h).min(1.0), &w) - dr_weight(q, &w)).abs();
        prop_assert!(d < 1e-5);
    }

    #[test]
    fn scaled_information_is_positive_definite(log_a in -8.0f64..8.0, st in 1e-4f64..1.0, sr in 1e-3f64..10.0) {
        let nominal = NominalDrInformation::from_degrees(st, sr);
        let m = scale_information(10f64.powf(log_a), &nominal);
        prop_assert!(m.cholesky().is_some());
        prop_assert!(m.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn keyframe_quality_in_unit_interval(c in 0.0f64..1e4, r in 1e-6f64..1e4) {
        let q = keyframe_quality(c, r);
        prop_assert!((0.0..=1.0).contains(&q));
    }

    #[test]
    fn smoothing_keeps_local_maxima(raw in proptest::collection::vec(0.1f64..1000.0, 1..20), w in 0usize..4) {
        let items: Vec<(u64, f64)> = raw.iter().enumerate().map(|(i, &a)| (i as u64, a)).collect();
        let out = smooth_window_weights(&items, w);
        prop_assert_eq!(out.len(), items.len());
        for (i, &(k, a)) in out.iter().enumerate() {
            prop_assert_eq!(k, i as u64);
            prop_assert!(a >= raw[i]);
            prop_assert!(a <= raw.iter().cloned().fold(0.0, f64::max));
        }
    }
}
