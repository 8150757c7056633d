//! Small aggregate-statistics building blocks used by the tree learners
//! and drift detectors.

use serde::{Deserialize, Serialize};

/// Weighted first/second-moment aggregate of a target variable:
/// `(weight, target_sum, target_sq_sum)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub weight: f64,
    pub sum: f64,
    pub sq_sum: f64,
}

impl GroupStats {
    pub fn add(&mut self, value: f64, weight: f64) {
        self.weight += weight;
        self.sum += value * weight;
        self.sq_sum += value * value * weight;
    }

    pub fn merge(&mut self, other: &GroupStats) {
        self.weight += other.weight;
        self.sum += other.sum;
        self.sq_sum += other.sq_sum;
    }

    pub fn mean(&self) -> f64 {
        if self.weight > 0.0 {
            self.sum / self.weight
        } else {
            0.0
        }
    }

    /// Population variance, clamped at zero against floating-point droop.
    pub fn variance(&self) -> f64 {
        if self.weight <= 0.0 {
            return 0.0;
        }
        let mean = self.sum / self.weight;
        (self.sq_sum / self.weight - mean * mean).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.weight <= 0.0
    }
}

/// Running `[min, max]` of an observed scalar stream.
///
/// Used to normalize absolute prediction errors into `[0, 1]` before they
/// are fed to a drift detector.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RangeTracker {
    bounds: Option<(f64, f64)>,
}

impl RangeTracker {
    pub fn observe(&mut self, value: f64) {
        self.bounds = Some(match self.bounds {
            None => (value, value),
            Some((lo, hi)) => (lo.min(value), hi.max(value)),
        });
    }

    pub fn width(&self) -> f64 {
        match self.bounds {
            Some((lo, hi)) => hi - lo,
            None => 0.0,
        }
    }

    pub fn min(&self) -> Option<f64> {
        self.bounds.map(|(lo, _)| lo)
    }

    pub fn max(&self) -> Option<f64> {
        self.bounds.map(|(_, hi)| hi)
    }

    /// Clamps `value` into the observed range; identity before any observation.
    pub fn clamp(&self, value: f64) -> f64 {
        match self.bounds {
            Some((lo, hi)) => value.clamp(lo, hi),
            None => value,
        }
    }

    /// `|error|` scaled by the observed range and clamped to `[0, 1]`.
    pub fn normalize_error(&self, abs_error: f64) -> f64 {
        let width = self.width();
        if width <= f64::EPSILON {
            if abs_error > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (abs_error / width).clamp(0.0, 1.0)
        }
    }
}
