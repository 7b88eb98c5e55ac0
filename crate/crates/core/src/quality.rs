//! Visual tracking health and the DR weights derived from it.
//!
//! A frame's quality score blends how many features were detected and how
//! many were matched against the local map. The score is mapped to a
//! multiplier on the nominal DR information, interpolated geometrically
//! between a lower and an upper bound: good tracking leaves DR nearly
//! inert, no tracking lets DR dominate.
//!
//! Keyframes get an analogous score from their covisibility with the
//! temporally preceding keyframe, normalized by a reference connection count
//! that is re-estimated online from well-tracked keyframes.

use nalgebra::Matrix6;

use crate::error::ConfigError;

/// Weights and reference counts of the frame quality score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityParams {
    pub omega1: f64,
    pub omega2: f64,
    pub n_det_ref: f64,
    pub n_trk_ref: f64,
}

impl Default for QualityParams {
    fn default() -> Self {
        Self {
            omega1: 0.5,
            omega2: 0.5,
            n_det_ref: 600.0,
            n_trk_ref: 120.0,
        }
    }
}

impl QualityParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.omega1 < 0.0 || self.omega2 < 0.0 {
            return Err(ConfigError::Constraint("omega1, omega2 must be >= 0".into()));
        }
        if (self.omega1 + self.omega2 - 1.0).abs() > 1e-12 {
            return Err(ConfigError::Constraint("omega1 + omega2 must equal 1".into()));
        }
        if !(self.n_det_ref > 0.0 && self.n_trk_ref > 0.0) {
            return Err(ConfigError::Constraint(
                "n_det_ref and n_trk_ref must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Bounds of the DR information multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightBounds {
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl Default for WeightBounds {
    fn default() -> Self {
        Self {
            alpha_min: 1e-1,
            alpha_max: 1e3,
        }
    }
}

impl WeightBounds {
    pub fn new(alpha_min: f64, alpha_max: f64) -> Result<Self, ConfigError> {
        let b = Self {
            alpha_min,
            alpha_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha_min > 0.0 && self.alpha_min < self.alpha_max) {
            return Err(ConfigError::Constraint(
                "need 0 < alpha_min < alpha_max".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, alpha: f64) -> bool {
        alpha >= self.alpha_min && alpha <= self.alpha_max
    }

    /// Smallest bounds that include both `self` and `alpha`.
    pub fn widened_to(&self, alpha: f64) -> Self {
        let mut b = Self {
            alpha_min: self.alpha_min.min(alpha),
            alpha_max: self.alpha_max.max(alpha),
        };
        if b.alpha_min == b.alpha_max {
            b.alpha_max = b.alpha_min * 10.0;
        }
        b
    }
}

/// Per-frame feature counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrackingStats {
    pub n_det: usize,
    pub n_trk: usize,
}

impl TrackingStats {
    pub fn new(n_det: usize, n_trk: usize) -> Self {
        debug_assert!(n_trk <= n_det, "n_trk {n_trk} > n_det {n_det}");
        Self { n_det, n_trk }
    }
}

/// Per-frame DR standard deviations; rotation stored in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalDrInformation {
    pub sigma_t: f64,
    pub sigma_r: f64,
}

impl Default for NominalDrInformation {
    fn default() -> Self {
        Self::from_degrees(0.004, 0.1)
    }
}

impl NominalDrInformation {
    pub fn from_degrees(sigma_t: f64, sigma_r_deg: f64) -> Self {
        Self {
            sigma_t,
            sigma_r: sigma_r_deg.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.sigma_t > 0.0 && self.sigma_r > 0.0) {
            return Err(ConfigError::Constraint(
                "DR standard deviations must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Diagonal information matrix in `(rho, phi)` order.
    pub fn matrix(&self) -> Matrix6<f64> {
        let it = 1.0 / (self.sigma_t * self.sigma_t);
        let ir = 1.0 / (self.sigma_r * self.sigma_r);
        Matrix6::from_diagonal(&nalgebra::Vector6::new(it, it, it, ir, ir, ir))
    }

    /// Smallest diagonal entry of the nominal information matrix.
    pub fn min_diagonal(&self) -> f64 {
        self.matrix().diagonal().min()
    }
}

fn clip01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Frame quality in `[0, 1]`; each ratio saturates before weighting.
pub fn compute_quality(stats: TrackingStats, params: &QualityParams) -> f64 {
    let det = clip01(stats.n_det as f64 / params.n_det_ref);
    let trk = clip01(stats.n_trk as f64 / params.n_trk_ref);
    clip01(params.omega1 * det + params.omega2 * trk)
}

/// DR information multiplier: `alpha_min * (alpha_max / alpha_min)^(1 - q)`.
pub fn dr_weight(quality: f64, bounds: &WeightBounds) -> f64 {
    let q = clip01(quality);
    bounds.alpha_min * (bounds.alpha_max / bounds.alpha_min).powf(1.0 - q)
}

pub fn scale_information(alpha: f64, nominal: &NominalDrInformation) -> Matrix6<f64> {
    debug_assert!(alpha > 0.0);
    nominal.matrix() * alpha
}

/// Keyframe quality from its connection count, saturated to `[0, 1]`.
pub fn keyframe_quality(c_ij: f64, c_ref: f64) -> f64 {
    debug_assert!(c_ref > 0.0);
    clip01(c_ij / c_ref)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Online estimate of the reference connection count.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionReference {
    c_ref: f64,
    q_well: f64,
    window: usize,
}

impl ConnectionReference {
    pub const INITIAL: f64 = 20.0;

    pub fn new(initial: f64, q_well: f64, window: usize) -> Self {
        Self {
            c_ref: initial,
            q_well,
            window,
        }
    }

    pub fn value(&self) -> f64 {
        self.c_ref
    }

    pub fn q_well(&self) -> f64 {
        self.q_well
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Re-estimates the reference from `(frame quality, connection count)`
    /// of recent keyframes, oldest first. Only the last `window` entries are
    /// considered; the previous value is kept if none is well tracked.
    pub fn update(&mut self, recent: &[(f64, f64)]) -> f64 {
        let start = recent.len().saturating_sub(self.window);
        let mut counts: Vec<f64> = recent[start..]
            .iter()
            .filter(|(q, c)| *q >= self.q_well && *c > 0.0)
            .map(|&(_, c)| c)
            .collect();
        if !counts.is_empty() {
            counts.sort_by(|a, b| a.total_cmp(b));
            self.c_ref = median(&counts);
        }
        self.c_ref
    }
}

impl Default for ConnectionReference {
    fn default() -> Self {
        Self::new(Self::INITIAL, 0.8, 10)
    }
}

/// Spreads DR weights along a chain of consecutive keyframes.
///
/// Each output weight is the maximum over neighbors within `half_width`
/// positions of `raw_j * (1 - d / (half_width + 1))`, `d` being the distance
/// in positions. Positions outside the slice are never touched.
pub fn smooth_window_weights(raw: &[(u64, f64)], half_width: usize) -> Vec<(u64, f64)> {
    let w = half_width as isize;
    let denom = (half_width + 1) as f64;
    (0..raw.len())
        .map(|i| {
            let lo = (i as isize - w).max(0) as usize;
            let hi = ((i as isize + w) as usize).min(raw.len() - 1);
            let alpha = (lo..=hi)
                .map(|j| {
                    let d = (i as isize - j as isize).unsigned_abs() as f64;
                    raw[j].1 * (1.0 - d / denom)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            (raw[i].0, alpha)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_examples() {
        let p = QualityParams::default();
        assert_eq!(compute_quality(TrackingStats::new(600, 120), &p), 1.0);
        assert_eq!(compute_quality(TrackingStats::new(0, 0), &p), 0.0);
        assert!((compute_quality(TrackingStats::new(300, 60), &p) - 0.5).abs() < 1e-15);
        assert_eq!(compute_quality(TrackingStats::new(1200, 240), &p), 1.0);
    }

    #[test]
    fn surplus_detection_does_not_compensate_tracking() {
        let p = QualityParams::default();
        let q = compute_quality(TrackingStats::new(1200, 0), &p);
        assert!((q - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weight_endpoints() {
        let b = WeightBounds::default();
        assert!((dr_weight(1.0, &b) - 0.1).abs() < 1e-15);
        assert!((dr_weight(0.0, &b) - 1000.0).abs() < 1e-9);
        assert!((dr_weight(0.5, &b) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn information_scaling() {
        let nominal = NominalDrInformation::default();
        let m = scale_information(10.0, &nominal);
        assert!((m[(0, 0)] - 625_000.0).abs() < 1e-6);
        assert_eq!(scale_information(1.0, &nominal), nominal.matrix());
    }

    #[test]
    fn keyframe_quality_examples() {
        assert_eq!(keyframe_quality(20.0, 20.0), 1.0);
        assert_eq!(keyframe_quality(40.0, 20.0), 1.0);
        assert_eq!(keyframe_quality(5.0, 20.0), 0.25);
    }

    #[test]
    fn c_ref_median() {
        let mut c = ConnectionReference::default();
        assert_eq!(c.update(&[]), 20.0);
        assert_eq!(c.update(&[(0.9, 10.0), (0.9, 20.0), (0.9, 30.0)]), 20.0);
        assert_eq!(
            c.update(&[(0.9, 10.0), (0.9, 20.0), (0.9, 30.0), (0.9, 40.0)]),
            25.0
        );
        // poorly tracked keyframes are ignored, previous value retained
        assert_eq!(c.update(&[(0.1, 400.0)]), 25.0);
    }

    #[test]
    fn c_ref_uses_only_the_window() {
        let mut c = ConnectionReference::new(20.0, 0.8, 2);
        assert_eq!(c.update(&[(0.9, 100.0), (0.9, 10.0), (0.9, 30.0)]), 20.0);
    }

    #[test]
    fn smoothing_spike() {
        let a = 1000.0;
        let raw: Vec<(u64, f64)> = (0..7).map(|i| (i, if i == 3 { a } else { 0.1 })).collect();
        let s = smooth_window_weights(&raw, 2);
        assert!((s[2].1 - 2.0 / 3.0 * a).abs() < 1e-9);
        assert!((s[4].1 - 2.0 / 3.0 * a).abs() < 1e-9);
        assert!((s[1].1 - a / 3.0).abs() < 1e-9);
        assert!((s[5].1 - a / 3.0).abs() < 1e-9);
        assert_eq!(s[0].1, 0.1);
        assert_eq!(s[6].1, 0.1);
        assert_eq!(s[3].1, a);
    }

    #[test]
    fn smoothing_edge_spike_is_one_sided() {
        let raw = vec![(10, 500.0), (11, 0.1), (12, 0.1), (13, 0.1)];
        let s = smooth_window_weights(&raw, 2);
        assert_eq!(s.len(), 4);
        assert_eq!(s[0], (10, 500.0));
        assert!((s[1].1 - 1000.0 / 3.0).abs() < 1e-9);
        assert!((s[2].1 - 500.0 / 3.0).abs() < 1e-9);
        assert_eq!(s[3].1, 0.1);
    }

    #[test]
    fn uniform_weights_are_a_fixed_point() {
        let raw: Vec<(u64, f64)> = (0..5).map(|i| (i, 0.1)).collect();
        assert_eq!(smooth_window_weights(&raw, 2), raw);
    }

    #[test]
    fn empty_window() {
        assert!(smooth_window_weights(&[], 2).is_empty());
    }
}
