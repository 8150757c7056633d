//! Incremental and batch regression error metrics, plus footprint accounting.
//!
//! The accumulator keeps running sums so that metrics over a stream cost O(1)
//! memory; merging two accumulators gives the same result as a single pass,
//! which allows deterministic parallel evaluation.

use crate::error::{Error, Result};
use crate::snapshot::ModelSnapshot;
use serde::{Deserialize, Serialize};

/// Running sums for all supported error metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricAccumulator {
    n: u64,
    sum_abs_err: f64,
    sum_sq_err: f64,
    /// Sum of |y - yhat| / |y| over points with y != 0.
    sum_ape: f64,
    /// Sum of 2|y - yhat| / (|y| + |yhat|), zero when the denominator is zero.
    sum_sape: f64,
    sum_y: f64,
    sum_y_sq: f64,
    /// Points excluded from MAPE because the target was zero.
    mape_skipped: u64,
}

impl MetricAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Record one (actual, predicted) pair.
    pub fn update(&mut self, y: f64, yhat: f64) -> Result<()> {
        if !y.is_finite() || !yhat.is_finite() {
            return Err(Error::validation(format!(
                "metric update requires finite values, got y={y}, yhat={yhat}"
            )));
        }
        let err = y - yhat;
        self.n += 1;
        self.sum_abs_err += err.abs();
        self.sum_sq_err += err * err;
        if y == 0.0 {
            self.mape_skipped += 1;
        } else {
            self.sum_ape += (err / y).abs();
        }
        let sape_denom = y.abs() + yhat.abs();
        if sape_denom > 0.0 {
            self.sum_sape += 2.0 * err.abs() / sape_denom;
        }
        self.sum_y += y;
        self.sum_y_sq += y * y;
        Ok(())
    }

    /// Combine with another accumulator; all fields are additive.
    pub fn merge(&mut self, other: &MetricAccumulator) {
        self.n += other.n;
        self.sum_abs_err += other.sum_abs_err;
        self.sum_sq_err += other.sum_sq_err;
        self.sum_ape += other.sum_ape;
        self.sum_sape += other.sum_sape;
        self.sum_y += other.sum_y;
        self.sum_y_sq += other.sum_y_sq;
        self.mape_skipped += other.mape_skipped;
    }

    /// Close the accumulator into a report.
    ///
    /// `naive_mae_in_sample` is the in-sample persistence MAE used as the
    /// MASE denominator; it must be strictly positive.
    pub fn finalize(&self, naive_mae_in_sample: f64) -> Result<MetricReport> {
        if self.n < 2 {
            return Err(Error::validation(format!(
                "metric finalization needs at least 2 points, got {}",
                self.n
            )));
        }
        if !(naive_mae_in_sample > 0.0) {
            return Err(Error::validation(
                "MASE undefined: in-sample naive MAE is zero",
            ));
        }
        let n = self.n as f64;
        let mae = self.sum_abs_err / n;
        let mse = self.sum_sq_err / n;
        let mape_n = self.n - self.mape_skipped;
        let mape = if mape_n > 0 {
            Some(100.0 * self.sum_ape / mape_n as f64)
        } else {
            None
        };
        let y_mean = self.sum_y / n;
        let ss_tot = self.sum_y_sq - n * y_mean * y_mean;
        let r2 = if ss_tot > 0.0 {
            Some(1.0 - self.sum_sq_err / ss_tot)
        } else {
            None
        };
        Ok(MetricReport {
            metrics: MetricValues {
                mae,
                mse,
                rmse: mse.sqrt(),
                mape,
                smape: 100.0 * self.sum_sape / n,
                mase: mae / naive_mae_in_sample,
                r2,
            },
            naive_mae_in_sample,
            footprint: Footprint::default(),
        })
    }
}

/// The seven error metrics of a single run.
///
/// `mape` is `None` when every target was zero; `r2` is `None` when the
/// targets carry no variance. All other values are finite by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub mape: Option<f64>,
    pub smape: f64,
    pub mase: f64,
    pub r2: Option<f64>,
}

/// Wall-clock and memory footprint of a run.
///
/// Times are seconds at millisecond resolution (never below 1 ms);
/// `model_bytes` is the logical snapshot size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub pretrain_seconds: f64,
    pub eval_seconds: f64,
    pub model_bytes: u64,
}

/// A finalized metric set plus footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: MetricValues,
    pub naive_mae_in_sample: f64,
    pub footprint: Footprint,
}

/// Mean absolute one-step difference of an ordered sequence: the in-sample
/// error of the persistence ("predict the previous value") forecast.
pub fn naive_mae(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::validation(format!(
            "naive MAE needs at least 2 values, got {}",
            values.len()
        )));
    }
    let sum: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    Ok(sum / (values.len() - 1) as f64)
}

/// Deterministic logical memory of a model snapshot, in bytes.
pub fn model_memory_bytes(snapshot: &ModelSnapshot) -> u64 {
    snapshot.logical_bytes()
}

/// Converts a measured duration to seconds at millisecond resolution.
///
/// Reported timings are always positive: anything under 1 ms reports as 1 ms.
pub fn seconds_at_ms_resolution(duration: std::time::Duration) -> f64 {
    let ms = (duration.as_secs_f64() * 1000.0).round().max(1.0);
    ms / 1000.0
}
