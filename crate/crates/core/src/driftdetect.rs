//! ADWIN adaptive-windowing change detection.
//!
//! The detector keeps a variable-length window of recent values in an
//! exponential histogram: buckets hold `(sum, sum_sq, count)` aggregates and
//! are grouped by capacity powers of two with at most `M` buckets per level,
//! so memory is O(M log n). Every `min_clock` updates all split points
//! between adjacent buckets are tested; when two subwindow means differ
//! beyond the confidence threshold the older subwindow is dropped.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Outcome of feeding one value to a detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftSignal {
    /// Window still looks stationary.
    None,
    /// A change was confirmed and stale data was dropped.
    Change,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Bucket {
    sum: f64,
    sq_sum: f64,
    count: u64,
}

/// ADWIN change detector over a real-valued stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdwinDetector {
    delta: f64,
    max_buckets_per_level: usize,
    min_clock: u32,
    /// `levels[i]` holds buckets of capacity `2^i`, ordered oldest first.
    levels: Vec<VecDeque<Bucket>>,
    total_count: u64,
    total_sum: f64,
    total_sq: f64,
    ticks: u32,
}

impl AdwinDetector {
    pub const DEFAULT_DELTA: f64 = 0.002;
    pub const DEFAULT_MAX_BUCKETS: usize = 5;
    pub const DEFAULT_MIN_CLOCK: u32 = 32;

    pub fn new(delta: f64) -> Result<Self> {
        Self::with_params(delta, Self::DEFAULT_MAX_BUCKETS, Self::DEFAULT_MIN_CLOCK)
    }

    pub fn with_params(delta: f64, max_buckets_per_level: usize, min_clock: u32) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::validation(format!(
                "ADWIN delta must be in (0, 1), got {delta}"
            )));
        }
        if max_buckets_per_level == 0 || min_clock == 0 {
            return Err(Error::validation(
                "ADWIN max_buckets_per_level and min_clock must be positive",
            ));
        }
        Ok(AdwinDetector {
            delta,
            max_buckets_per_level,
            min_clock,
            levels: Vec::new(),
            total_count: 0,
            total_sum: 0.0,
            total_sq: 0.0,
            ticks: 0,
        })
    }

    /// Number of retained values.
    pub fn len(&self) -> u64 {
        self.total_count
    }

    pub fn is_empty(&self) -> bool {
        self.total_count == 0
    }

    /// Mean of the retained window.
    pub fn mean(&self) -> f64 {
        if self.total_count == 0 {
            0.0
        } else {
            self.total_sum / self.total_count as f64
        }
    }

    /// Population variance of the retained window.
    pub fn variance(&self) -> f64 {
        if self.total_count == 0 {
            return 0.0;
        }
        let mean = self.mean();
        (self.total_sq / self.total_count as f64 - mean * mean).max(0.0)
    }

    /// Total histogram buckets currently allocated.
    pub fn bucket_count(&self) -> usize {
        self.levels.iter().map(VecDeque::len).sum()
    }

    /// Appends a value and reports whether a change was confirmed.
    pub fn update(&mut self, value: f64) -> Result<DriftSignal> {
        if !value.is_finite() {
            return Err(Error::validation(format!(
                "ADWIN update requires a finite value, got {value}"
            )));
        }
        self.insert(value);
        self.ticks += 1;
        if self.ticks < self.min_clock {
            return Ok(DriftSignal::None);
        }
        self.ticks = 0;
        Ok(self.shrink_if_changed())
    }

    fn insert(&mut self, value: f64) {
        if self.levels.is_empty() {
            self.levels.push(VecDeque::new());
        }
        self.levels[0].push_back(Bucket {
            sum: value,
            sq_sum: value * value,
            count: 1,
        });
        self.total_count += 1;
        self.total_sum += value;
        self.total_sq += value * value;
        self.compress();
    }

    /// Merges the two oldest buckets of any overfull level into the next one.
    fn compress(&mut self) {
        let mut level = 0;
        while level < self.levels.len() {
            while self.levels[level].len() > self.max_buckets_per_level {
                let older = self.levels[level].pop_front().expect("overfull level");
                let newer = self.levels[level].pop_front().expect("overfull level");
                let merged = Bucket {
                    sum: older.sum + newer.sum,
                    sq_sum: older.sq_sum + newer.sq_sum,
                    count: older.count + newer.count,
                };
                if level + 1 == self.levels.len() {
                    self.levels.push(VecDeque::new());
                }
                // The merged pair is newer than everything already promoted.
                self.levels[level + 1].push_back(merged);
            }
            level += 1;
        }
    }

    fn delete_oldest(&mut self) {
        for level in (0..self.levels.len()).rev() {
            if let Some(bucket) = self.levels[level].pop_front() {
                self.total_count -= bucket.count;
                self.total_sum -= bucket.sum;
                self.total_sq -= bucket.sq_sum;
                return;
            }
        }
    }

    /// Scans all split points; drops the older subwindow at the deepest
    /// violating split and repeats until the window looks stationary.
    fn shrink_if_changed(&mut self) -> DriftSignal {
        let mut signal = DriftSignal::None;
        loop {
            let buckets = self.bucket_count();
            if buckets < 2 || self.total_count < 2 {
                break;
            }
            let n_splits = buckets - 1;
            let delta_prime = self.delta / n_splits as f64;
            let ln_term = (2.0 / delta_prime).ln();
            let variance = self.variance();
            let total_n = self.total_count as f64;
            let total_sum = self.total_sum;

            let mut n0 = 0.0f64;
            let mut sum0 = 0.0f64;
            let mut seen = 0usize;
            let mut cut_at = None;
            'scan: for level in (0..self.levels.len()).rev() {
                for bucket in &self.levels[level] {
                    n0 += bucket.count as f64;
                    sum0 += bucket.sum;
                    seen += 1;
                    if seen == buckets {
                        break 'scan;
                    }
                    let n1 = total_n - n0;
                    let m = 1.0 / (1.0 / n0 + 1.0 / n1);
                    let epsilon =
                        (2.0 / m * variance * ln_term).sqrt() + 2.0 / (3.0 * m) * ln_term;
                    let mean0 = sum0 / n0;
                    let mean1 = (total_sum - sum0) / n1;
                    if (mean0 - mean1).abs() >= epsilon {
                        cut_at = Some(seen);
                    }
                }
            }

            match cut_at {
                None => break,
                Some(prefix) => {
                    for _ in 0..prefix {
                        self.delete_oldest();
                    }
                    signal = DriftSignal::Change;
                }
            }
        }
        signal
    }

    #[cfg(test)]
    fn assert_internal_consistency(&self) {
        let mut count = 0u64;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for (level, row) in self.levels.iter().enumerate() {
            assert!(
                row.len() <= self.max_buckets_per_level,
                "level {level} holds {} buckets",
                row.len()
            );
            for b in row {
                count += b.count;
                sum += b.sum;
                sq += b.sq_sum;
            }
        }
        assert_eq!(count, self.total_count);
        let tol = 1e-9 * (1.0 + sum.abs().max(sq.abs()));
        assert!((sum - self.total_sum).abs() <= tol);
        assert!((sq - self.total_sq).abs() <= tol);
    }
}

/// The ADWIN cut bound for subwindows of `n0` and `n1` values drawn from a
/// window with the given variance:
///
/// `eps = sqrt((2/m) * var * ln(2/delta')) + (2/(3m)) * ln(2/delta')`
/// with the harmonic count `m = 1 / (1/n0 + 1/n1)`.
pub fn adwin_cut_threshold(n0: u64, n1: u64, variance: f64, delta_prime: f64) -> Result<f64> {
    if n0 == 0 || n1 == 0 {
        return Err(Error::validation("cut threshold requires n0, n1 >= 1"));
    }
    if !(variance >= 0.0) {
        return Err(Error::validation("cut threshold requires variance >= 0"));
    }
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(Error::validation("cut threshold requires delta' in (0, 1)"));
    }
    let m = 1.0 / (1.0 / n0 as f64 + 1.0 / n1 as f64);
    let ln_term = (2.0 / delta_prime).ln();
    Ok((2.0 / m * variance * ln_term).sqrt() + 2.0 / (3.0 * m) * ln_term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_update_is_never_a_change() {
        let mut det = AdwinDetector::new(0.002).unwrap();
        assert_eq!(det.update(1.0).unwrap(), DriftSignal::None);
        assert_eq!(det.len(), 1);
    }

    #[test]
    fn cut_threshold_spot_value() {
        let eps = adwin_cut_threshold(100, 100, 0.25, 0.002).unwrap();
        assert_relative_eq!(eps, 0.35493, epsilon = 1e-5);
    }

    #[test]
    fn cut_threshold_zero_variance_keeps_only_linear_term() {
        let eps = adwin_cut_threshold(100, 100, 0.0, 0.002).unwrap();
        let m = 50.0;
        assert_relative_eq!(eps, 2.0 / (3.0 * m) * (2.0f64 / 0.002).ln(), epsilon = 1e-12);
    }

    #[test]
    fn cut_threshold_shrinks_with_more_data() {
        let a = adwin_cut_threshold(100, 100, 0.25, 0.002).unwrap();
        let b = adwin_cut_threshold(200, 200, 0.25, 0.002).unwrap();
        assert!(b < a);
    }

    #[test]
    fn cut_threshold_rejects_zero_counts() {
        assert!(adwin_cut_threshold(0, 10, 0.1, 0.002).is_err());
        assert!(adwin_cut_threshold(10, 0, 0.1, 0.002).is_err());
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut det = AdwinDetector::new(0.002).unwrap();
        assert!(det.update(f64::NAN).is_err());
        assert!(det.update(f64::INFINITY).is_err());
    }

    #[test]
    fn stationary_bernoulli_rarely_signals() {
        let mut changes = 0;
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut det = AdwinDetector::new(0.002).unwrap();
            for _ in 0..20_000 {
                let v = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
                if det.update(v).unwrap() == DriftSignal::Change {
                    changes += 1;
                }
            }
            det.assert_internal_consistency();
        }
        assert!(changes <= 1, "got {changes} false alarms over 5 stationary runs");
    }

    #[test]
    fn mean_step_is_detected_quickly_and_shrinks_window() {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut det = AdwinDetector::new(0.002).unwrap();
            for _ in 0..2_000 {
                let v = if rng.random_bool(0.2) { 1.0 } else { 0.0 };
                det.update(v).unwrap();
            }
            let mut detected_at = None;
            for t in 0..300 {
                let before = det.len();
                let v = if rng.random_bool(0.8) { 1.0 } else { 0.0 };
                if det.update(v).unwrap() == DriftSignal::Change {
                    assert!(det.len() < before, "change must shrink the window");
                    detected_at = Some(t);
                    break;
                }
            }
            let t = detected_at.expect("change not detected within 300 updates");
            assert!(t < 300, "seed {seed} detected at {t}");
            det.assert_internal_consistency();
        }
    }

    #[test]
    fn window_mean_matches_list_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut det = AdwinDetector::new(0.01).unwrap();
        let mut oracle: std::collections::VecDeque<f64> = Default::default();
        for t in 0..10_000 {
            // A slow drift keeps the detector dropping data now and then.
            let base = if t < 5_000 { 0.3 } else { 0.7 };
            let v: f64 = base + rng.random_range(-0.2..0.2);
            let before = det.len();
            det.update(v).unwrap();
            oracle.push_back(v);
            let dropped = (before + 1 - det.len()) as usize;
            for _ in 0..dropped {
                oracle.pop_front();
            }
            let oracle_mean: f64 = oracle.iter().sum::<f64>() / oracle.len() as f64;
            assert!(
                (det.mean() - oracle_mean).abs() <= 1e-9,
                "t={t}: {} vs {}",
                det.mean(),
                oracle_mean
            );
        }
        det.assert_internal_consistency();
    }

    #[test]
    fn bucket_count_is_logarithmic_in_stream_length() {
        let mut det = AdwinDetector::new(1e-9).unwrap(); // effectively never cuts
        let max = AdwinDetector::DEFAULT_MAX_BUCKETS;
        for n in 1..=1_000_000u64 {
            det.update((n % 17) as f64 / 17.0).unwrap();
            let bound = max * ((64 - n.leading_zeros() as usize) + 1);
            assert!(
                det.bucket_count() <= bound,
                "n={n}: {} buckets > bound {bound}",
                det.bucket_count()
            );
        }
        det.assert_internal_consistency();
    }
}
