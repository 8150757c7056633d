//! Loading, cleaning, resampling, featurizing and synthesizing univariate
//! CPU-utilization time series.
//!
//! The CSV schema is `timestamp,cpu_util` with one row per sample; timestamps
//! are Unix epoch seconds or ISO-8601 UTC. After [`resample_1min`] a series
//! sits on an even one-minute grid, ready for lag featurization.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Tolerance applied before range validation: raw loggers occasionally emit
/// 100.3% style readings, which are clamped rather than rejected.
const CLAMP_TOLERANCE: f64 = 0.5;

/// A timestamped CPU-utilization sequence.
///
/// Invariants: timestamps strictly increasing, values finite and in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    points: Vec<(i64, f64)>,
}

impl TimeSeries {
    /// Builds a series, validating ordering and value range.
    pub fn new(points: Vec<(i64, f64)>) -> Result<Self> {
        for (i, &(ts, v)) in points.iter().enumerate() {
            if !v.is_finite() || !(0.0..=100.0).contains(&v) {
                return Err(Error::validation(format!(
                    "value {v} at index {i} outside [0, 100]"
                )));
            }
            if i > 0 && points[i - 1].0 >= ts {
                return Err(Error::validation(format!(
                    "timestamps not strictly increasing at index {i}"
                )));
            }
        }
        Ok(TimeSeries { points })
    }

    /// Builds a one-minute-spaced series starting at epoch 0 from raw values.
    pub fn from_minute_values(values: &[f64]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (i as i64 * 60, v))
                .collect(),
        )
    }

    pub fn points(&self) -> &[(i64, f64)] {
        &self.points
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, v)| v).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One training example: `window_size` consecutive past values and the next value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagInstance {
    /// Past values ordered oldest to newest: `x(t-L) ... x(t-1)`.
    pub features: Vec<f64>,
    /// The next value `x(t)`.
    pub target: f64,
}

/// Chronologically ordered lag instances with a fixed window size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagDataset {
    pub instances: Vec<LagInstance>,
    pub window_size: usize,
}

impl LagDataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.instances.iter().map(|i| i.target).collect()
    }
}

/// Parses `timestamp,cpu_util` CSV text into a sorted, deduplicated series.
///
/// Timestamps may be integer/fractional epoch seconds, RFC 3339, or
/// `YYYY-MM-DD HH:MM:SS` (interpreted as UTC). Rows sharing a timestamp
/// collapse to their mean value.
pub fn parse_csv(raw_text: &str) -> Result<TimeSeries> {
    let mut lines = raw_text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::validation("empty file: missing header"))?;
    let normalized: String = header
        .trim()
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    if normalized != "timestamp,cpu_util" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `timestamp,cpu_util`, got `{}`", header.trim()),
        });
    }

    let mut rows: Vec<(i64, f64)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.splitn(2, ',');
        let ts_field = fields.next().unwrap_or("").trim();
        let value_field = fields
            .next()
            .ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "missing cpu_util column".into(),
            })?
            .trim();

        let ts = parse_timestamp(ts_field).ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("unparseable timestamp `{ts_field}`"),
        })?;
        let raw_value: f64 = value_field.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("unparseable cpu_util `{value_field}`"),
        })?;
        if !raw_value.is_finite()
            || raw_value < -CLAMP_TOLERANCE
            || raw_value > 100.0 + CLAMP_TOLERANCE
        {
            return Err(Error::validation(format!(
                "line {line_no}: cpu_util {raw_value} outside [0, 100] (±{CLAMP_TOLERANCE} tolerance)"
            )));
        }
        rows.push((ts, raw_value.clamp(0.0, 100.0)));
    }

    if rows.is_empty() {
        return Err(Error::validation("empty file: no data rows"));
    }

    rows.sort_by_key(|&(ts, _)| ts);

    // Collapse duplicate timestamps to their mean.
    let mut points: Vec<(i64, f64)> = Vec::with_capacity(rows.len());
    let mut i = 0;
    while i < rows.len() {
        let ts = rows[i].0;
        let mut sum = 0.0;
        let mut count = 0usize;
        while i < rows.len() && rows[i].0 == ts {
            sum += rows[i].1;
            count += 1;
            i += 1;
        }
        points.push((ts, sum / count as f64));
    }

    TimeSeries::new(points)
}

fn parse_timestamp(field: &str) -> Option<i64> {
    if let Ok(ts) = field.parse::<i64>() {
        return Some(ts);
    }
    if let Ok(ts) = field.parse::<f64>() {
        if ts.is_finite() {
            return Some(ts.floor() as i64);
        }
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(field) {
        return Some(dt.timestamp());
    }
    if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(field, "%Y-%m-%d %H:%M:%S") {
        return Some(dt.and_utc().timestamp());
    }
    None
}

/// Serializes a series back to the CSV schema (values at 6 decimal places).
pub fn write_csv(series: &TimeSeries) -> String {
    let mut out = String::with_capacity(series.len() * 24 + 20);
    out.push_str("timestamp,cpu_util\n");
    for &(ts, v) in series.points() {
        out.push_str(&format!("{ts},{v:.6}\n"));
    }
    out
}

/// Resamples a series onto an even one-minute grid.
///
/// The grid starts at the first timestamp rounded down to the minute. Each
/// minute bucket takes the mean of the points falling in it; empty interior
/// buckets are linearly interpolated between the nearest non-empty buckets.
pub fn resample_1min(series: &TimeSeries) -> Result<TimeSeries> {
    if series.is_empty() {
        return Err(Error::validation("cannot resample an empty series"));
    }
    if series.len() == 1 {
        return Ok(series.clone());
    }

    let start = series.points[0].0.div_euclid(60) * 60;
    let last = series.points[series.len() - 1].0;
    let n_buckets = ((last - start).div_euclid(60) + 1) as usize;

    let mut sums = vec![0.0f64; n_buckets];
    let mut counts = vec![0usize; n_buckets];
    for &(ts, v) in series.points() {
        let idx = ((ts - start).div_euclid(60)) as usize;
        sums[idx] += v;
        counts[idx] += 1;
    }

    let mut values = vec![f64::NAN; n_buckets];
    for i in 0..n_buckets {
        if counts[i] > 0 {
            values[i] = sums[i] / counts[i] as f64;
        }
    }

    // First and last buckets are non-empty by construction; fill the gaps.
    let mut prev_filled = 0usize;
    for i in 1..n_buckets {
        if values[i].is_nan() {
            continue;
        }
        if i > prev_filled + 1 {
            let left = values[prev_filled];
            let right = values[i];
            let span = (i - prev_filled) as f64;
            for (step, slot) in (prev_filled + 1..i).enumerate() {
                let frac = (step + 1) as f64 / span;
                values[slot] = left + (right - left) * frac;
            }
        }
        prev_filled = i;
    }

    let points = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| (start + i as i64 * 60, v.clamp(0.0, 100.0)))
        .collect();
    TimeSeries::new(points)
}

/// Turns a series of `n` values into `n - L` lag instances.
///
/// Instance `i` has features `x(i) ... x(i+L-1)` and target `x(i+L)`.
pub fn make_lag_dataset(series: &TimeSeries, window_size: usize) -> Result<LagDataset> {
    if window_size == 0 {
        return Err(Error::validation("window size must be positive"));
    }
    let n = series.len();
    if n <= window_size {
        return Err(Error::validation(format!(
            "series has {n} points, need more than window size {window_size}"
        )));
    }
    let values = series.values();
    let instances = (0..n - window_size)
        .map(|i| LagInstance {
            features: values[i..i + window_size].to_vec(),
            target: values[i + window_size],
        })
        .collect();
    Ok(LagDataset {
        instances,
        window_size,
    })
}

/// Splits a dataset chronologically: the first `⌊n·fraction⌋` instances train,
/// the rest test. No shuffling.
pub fn chronological_split(
    dataset: &LagDataset,
    train_fraction: f64,
) -> Result<(LagDataset, LagDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::validation(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::validation("cannot split an empty dataset"));
    }
    let cut = (dataset.len() as f64 * train_fraction).floor() as usize;
    let (train, test) = dataset.instances.split_at(cut);
    Ok((
        LagDataset {
            instances: train.to_vec(),
            window_size: dataset.window_size,
        },
        LagDataset {
            instances: test.to_vec(),
            window_size: dataset.window_size,
        },
    ))
}

/// Configuration for the synthetic stress-style workload generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub total_minutes: usize,
    /// Length of each constant-level workload block, in minutes.
    pub workload_minutes: usize,
    /// Pause between workload blocks; rounded up to whole minutes.
    pub pause_seconds: u64,
    /// Gaussian noise applied to workload samples, in utilization percent.
    pub noise_std: f64,
}

impl SynthConfig {
    pub fn new(seed: u64, total_minutes: usize) -> Self {
        SynthConfig {
            seed,
            total_minutes,
            workload_minutes: 60,
            pause_seconds: 60,
            noise_std: 2.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.total_minutes == 0 || self.workload_minutes == 0 {
            return Err(Error::validation(
                "total_minutes and workload_minutes must be positive",
            ));
        }
        if self.total_minutes < self.workload_minutes {
            return Err(Error::validation(format!(
                "total_minutes {} < workload_minutes {}",
                self.total_minutes, self.workload_minutes
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::validation("noise_std must be >= 0"));
        }
        Ok(())
    }
}

/// Generates a repeating workload/pause pattern.
///
/// Each workload block holds a uniform-random level in `[0, 100]` plus
/// Gaussian noise; each pause block holds a near-idle level uniform in
/// `[0, 5]`. Values are clamped to `[0, 100]`, timestamps start at 0 with
/// one-minute spacing, and the output is deterministic for a given seed.
pub fn generate_synthetic_workload(cfg: &SynthConfig) -> Result<TimeSeries> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_std)
        .map_err(|e| Error::validation(format!("invalid noise_std: {e}")))?;
    let pause_minutes = (cfg.pause_seconds as usize).div_ceil(60);

    let mut values = Vec::with_capacity(cfg.total_minutes);
    while values.len() < cfg.total_minutes {
        let level: f64 = rng.random_range(0.0..=100.0);
        for _ in 0..cfg.workload_minutes {
            if values.len() >= cfg.total_minutes {
                break;
            }
            let sample: f64 = level + noise.sample(&mut rng);
            values.push(sample.clamp(0.0, 100.0));
        }
        if pause_minutes > 0 && values.len() < cfg.total_minutes {
            let idle: f64 = rng.random_range(0.0..=5.0);
            for _ in 0..pause_minutes {
                if values.len() >= cfg.total_minutes {
                    break;
                }
                values.push(idle);
            }
        }
    }

    TimeSeries::from_minute_values(&values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_csv_direct() {
        let series = parse_csv("timestamp,cpu_util\n0,10\n60,20").unwrap();
        assert_eq!(series.points(), &[(0, 10.0), (60, 20.0)]);
    }

    #[test]
    fn parse_csv_sorts_out_of_order_rows() {
        let series = parse_csv("timestamp,cpu_util\n60,20\n0,10").unwrap();
        assert_eq!(series.points(), &[(0, 10.0), (60, 20.0)]);
    }

    #[test]
    fn parse_csv_reports_line_of_bad_row() {
        let err = parse_csv("timestamp,cpu_util\n0,10\n60,abc").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn parse_csv_collapses_duplicate_timestamps() {
        let series = parse_csv("timestamp,cpu_util\n0,10\n0,20\n60,30").unwrap();
        assert_eq!(series.points(), &[(0, 15.0), (60, 30.0)]);
    }

    #[test]
    fn parse_csv_accepts_iso_8601() {
        let series = parse_csv(
            "timestamp,cpu_util\n1970-01-01T00:00:00Z,1\n1970-01-01 00:01:00,2",
        )
        .unwrap();
        assert_eq!(series.points(), &[(0, 1.0), (60, 2.0)]);
    }

    #[test]
    fn parse_csv_clamps_within_tolerance_and_rejects_beyond() {
        let ok = parse_csv("timestamp,cpu_util\n0,100.4\n60,-0.3").unwrap();
        assert_eq!(ok.points(), &[(0, 100.0), (60, 0.0)]);
        assert!(parse_csv("timestamp,cpu_util\n0,101").is_err());
        assert!(parse_csv("timestamp,cpu_util\n0,-1").is_err());
    }

    #[test]
    fn parse_csv_rejects_empty_input() {
        assert!(parse_csv("timestamp,cpu_util\n").is_err());
        assert!(parse_csv("").is_err());
    }

    #[test]
    fn resample_takes_bucket_means() {
        let series = TimeSeries::new(vec![(0, 10.0), (30, 20.0), (60, 30.0)]).unwrap();
        let out = resample_1min(&series).unwrap();
        assert_eq!(out.points(), &[(0, 15.0), (60, 30.0)]);
    }

    #[test]
    fn resample_interpolates_gaps() {
        let series = TimeSeries::new(vec![(0, 10.0), (120, 30.0)]).unwrap();
        let out = resample_1min(&series).unwrap();
        assert_eq!(out.points(), &[(0, 10.0), (60, 20.0), (120, 30.0)]);
    }

    #[test]
    fn resample_is_identity_on_aligned_series() {
        let series = TimeSeries::from_minute_values(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(resample_1min(&series).unwrap(), series);
    }

    #[test]
    fn resample_single_point_unchanged() {
        let series = TimeSeries::new(vec![(95, 42.0)]).unwrap();
        assert_eq!(resample_1min(&series).unwrap(), series);
    }

    #[test]
    fn lag_dataset_definition() {
        let series = TimeSeries::from_minute_values(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let ds = make_lag_dataset(&series, 2).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.instances[0].features, vec![1.0, 2.0]);
        assert_eq!(ds.instances[0].target, 3.0);
        assert_eq!(ds.instances[2].features, vec![3.0, 4.0]);
        assert_eq!(ds.instances[2].target, 5.0);
    }

    #[test]
    fn lag_dataset_rejects_short_series() {
        let series = TimeSeries::from_minute_values(&[1.0, 2.0, 3.0]).unwrap();
        let err = make_lag_dataset(&series, 3).unwrap_err();
        assert!(err.to_string().contains('3'));
    }

    #[test]
    fn lag_dataset_constant_series() {
        let series = TimeSeries::from_minute_values(&[5.0; 4]).unwrap();
        let ds = make_lag_dataset(&series, 2).unwrap();
        assert_eq!(ds.len(), 2);
        for inst in &ds.instances {
            assert_eq!(inst.features, vec![5.0, 5.0]);
            assert_eq!(inst.target, 5.0);
        }
    }

    #[test]
    fn split_matches_published_partition_sizes() {
        // 47,315 instances at fraction 0.8 -> 37,852 train / 9,463 test.
        let instances = vec![
            LagInstance {
                features: vec![0.0],
                target: 0.0,
            };
            47_315
        ];
        let ds = LagDataset {
            instances,
            window_size: 1,
        };
        let (train, test) = chronological_split(&ds, 0.8).unwrap();
        assert_eq!(train.len(), 37_852);
        assert_eq!(test.len(), 9_463);
    }

    #[test]
    fn split_small_and_invalid_fraction() {
        let series = TimeSeries::from_minute_values(&(0..11).map(f64::from).collect::<Vec<_>>())
            .unwrap();
        let ds = make_lag_dataset(&series, 1).unwrap();
        assert_eq!(ds.len(), 10);
        let (train, test) = chronological_split(&ds, 0.8).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert!(chronological_split(&ds, 1.5).is_err());
        assert!(chronological_split(&ds, 0.0).is_err());
    }

    #[test]
    fn synth_is_deterministic() {
        let cfg = SynthConfig::new(7, 300);
        let a = generate_synthetic_workload(&cfg).unwrap();
        let b = generate_synthetic_workload(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 300);
    }

    #[test]
    fn synth_zero_noise_blocks_are_constant() {
        let mut cfg = SynthConfig::new(3, 122);
        cfg.noise_std = 0.0;
        let series = generate_synthetic_workload(&cfg).unwrap();
        let values = series.values();
        // Block schedule: workload minutes 0..60, pause 60, workload 61..121,
        // pause 121.
        let first: Vec<_> = values[0..60].to_vec();
        assert!(first.iter().all(|&v| v == first[0]));
        let second: Vec<_> = values[61..121].to_vec();
        assert!(second.iter().all(|&v| v == second[0]));
        assert_ne!(first[0], second[0]);
        assert!(values[60] <= 5.0);
        assert!(values[121] <= 5.0);
        assert_ne!(values[60], first[0]);
        assert_ne!(values[121], second[0]);
    }

    #[test]
    fn synth_block_means_track_drawn_levels() {
        let mut quiet = SynthConfig::new(11, 600);
        quiet.noise_std = 0.0;
        let levels = generate_synthetic_workload(&quiet).unwrap();
        let noisy = generate_synthetic_workload(&SynthConfig::new(11, 600)).unwrap();
        let tolerance = 3.0 * 2.0 / (60.0f64).sqrt();
        // Same seed and draw count, so the level sequence is shared.
        for block in 0..9 {
            let lo = block * 61;
            let hi = lo + 60;
            let level = levels.values()[lo];
            if !(10.0..=90.0).contains(&level) {
                continue; // clamping would bias the mean
            }
            let mean: f64 = noisy.values()[lo..hi].iter().sum::<f64>() / 60.0;
            assert!(
                (mean - level).abs() <= tolerance,
                "block {block}: mean {mean} vs level {level}"
            );
        }
    }

    #[test]
    fn synth_rejects_bad_config() {
        let mut cfg = SynthConfig::new(1, 30);
        cfg.workload_minutes = 60;
        assert!(generate_synthetic_workload(&cfg).is_err());
        let mut cfg = SynthConfig::new(1, 100);
        cfg.noise_std = -1.0;
        assert!(generate_synthetic_workload(&cfg).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_round_trip(values in prop::collection::vec(0.0..100.0f64, 1..50)) {
                let series = TimeSeries::from_minute_values(&values).unwrap();
                let text = write_csv(&series);
                let back = parse_csv(&text).unwrap();
                prop_assert_eq!(back.len(), series.len());
                for (a, b) in back.points().iter().zip(series.points()) {
                    prop_assert_eq!(a.0, b.0);
                    prop_assert!((a.1 - b.1).abs() <= 1e-6);
                }
            }

            #[test]
            fn resample_is_idempotent(
                raw in prop::collection::vec((0i64..5000, 0.0..100.0f64), 1..60)
            ) {
                let mut rows = raw;
                rows.sort_by_key(|r| r.0);
                rows.dedup_by_key(|r| r.0);
                let series = TimeSeries::new(rows).unwrap();
                let once = resample_1min(&series).unwrap();
                let twice = resample_1min(&once).unwrap();
                prop_assert_eq!(once, twice);
            }

            #[test]
            fn lag_targets_follow_series_order(
                values in prop::collection::vec(0.0..100.0f64, 4..40),
                window in 1usize..3,
            ) {
                let series = TimeSeries::from_minute_values(&values).unwrap();
                let ds = make_lag_dataset(&series, window).unwrap();
                prop_assert_eq!(ds.len(), values.len() - window);
                for (i, inst) in ds.instances.iter().enumerate() {
                    prop_assert_eq!(inst.target, values[i + window]);
                    prop_assert_eq!(inst.features.last().copied().unwrap(), values[i + window - 1]);
                }
            }

            #[test]
            fn synth_stays_in_range(seed in 0u64..1000) {
                let series = generate_synthetic_workload(&SynthConfig::new(seed, 150)).unwrap();
                prop_assert!(series.values().iter().all(|v| (0.0..=100.0).contains(v)));
            }
        }
    }
}
