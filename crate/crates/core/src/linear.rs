//! Online linear regressors: SGD with squared loss and Passive-Aggressive
//! regression, each with an optional running feature standardizer.
//!
//! Raw lag features live on a 0-100 scale; vanilla learning rates diverge on
//! them, so standardization defaults to on. Trees are scale-invariant and do
//! not use the scaler.

use crate::error::{Error, Result};
use crate::snapshot::{ModelSnapshot, SnapshotCounts};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Per-feature running mean and variance (Welford's one-pass recurrence).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunningScaler {
    count: u64,
    means: Vec<f64>,
    m2s: Vec<f64>,
}

impl RunningScaler {
    pub fn new(dim: usize) -> Self {
        RunningScaler {
            count: 0,
            means: vec![0.0; dim],
            m2s: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self, feature: usize) -> f64 {
        self.means[feature]
    }

    /// Population standard deviation of one feature.
    pub fn std(&self, feature: usize) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2s[feature] / self.count as f64).sqrt()
        }
    }

    fn check_dim(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.means.len() {
            return Err(Error::validation(format!(
                "scaler expects {} features, got {}",
                self.means.len(),
                features.len()
            )));
        }
        Ok(())
    }

    /// Folds one observation into the running moments.
    pub fn observe(&mut self, features: &[f64]) -> Result<()> {
        self.check_dim(features)?;
        self.count += 1;
        let n = self.count as f64;
        for (j, &x) in features.iter().enumerate() {
            let delta = x - self.means[j];
            self.means[j] += delta / n;
            self.m2s[j] += delta * (x - self.means[j]);
        }
        Ok(())
    }

    /// Standardizes without updating: `(x - mean) / max(std, 1e-9)`.
    ///
    /// Before any observation this returns zeros.
    pub fn standardize(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        if self.count == 0 {
            return Ok(vec![0.0; features.len()]);
        }
        let n = self.count as f64;
        Ok(features
            .iter()
            .enumerate()
            .map(|(j, &x)| (x - self.means[j]) / (self.m2s[j] / n).sqrt().max(1e-9))
            .collect())
    }

    /// Updates the running moments with the raw features, then standardizes.
    pub fn transform(&mut self, features: &[f64]) -> Result<Vec<f64>> {
        self.observe(features)?;
        self.standardize(features)
    }
}

/// Learning-rate schedule for SGD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearningRate {
    Constant,
    /// `eta_t = eta0 / (1 + t)` where `t` counts prior updates.
    InverseTime,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgdParams {
    pub learning_rate: f64,
    pub schedule: LearningRate,
    pub standardize: bool,
}

impl Default for SgdParams {
    fn default() -> Self {
        SgdParams {
            learning_rate: 0.01,
            schedule: LearningRate::Constant,
            standardize: true,
        }
    }
}

/// Linear model trained by stochastic gradient descent on squared loss.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgdRegressor {
    params: SgdParams,
    weights: Vec<f64>,
    bias: f64,
    updates: u64,
    scaler: Option<RunningScaler>,
}

impl SgdRegressor {
    pub fn new(dim: usize, params: SgdParams) -> Self {
        let scaler = params.standardize.then(|| RunningScaler::new(dim));
        SgdRegressor {
            params,
            weights: vec![0.0; dim],
            bias: 0.0,
            updates: 0,
            scaler,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn input(&self, features: &[f64]) -> Result<Vec<f64>> {
        match &self.scaler {
            Some(s) => s.standardize(features),
            None => {
                check_dim(self.weights.len(), features)?;
                Ok(features.to_vec())
            }
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        Ok(dot(&self.weights, &self.input(features)?) + self.bias)
    }

    pub fn learn(&mut self, features: &[f64], target: f64) -> Result<()> {
        let x = match &mut self.scaler {
            Some(s) => s.transform(features)?,
            None => {
                check_dim(self.weights.len(), features)?;
                features.to_vec()
            }
        };
        let eta = match self.params.schedule {
            LearningRate::Constant => self.params.learning_rate,
            LearningRate::InverseTime => self.params.learning_rate / (1.0 + self.updates as f64),
        };
        let error = target - (dot(&self.weights, &x) + self.bias);
        let step = eta * error;
        let old_bias = self.bias;
        let mut ok = true;
        for (w, &xi) in self.weights.iter_mut().zip(&x) {
            *w += step * xi;
            ok &= w.is_finite();
        }
        self.bias += step;
        ok &= self.bias.is_finite();
        if !ok {
            // Roll the model back to its pre-update state.
            for (w, &xi) in self.weights.iter_mut().zip(&x) {
                *w -= step * xi;
            }
            self.bias = old_bias;
            return Err(Error::numeric(format!(
                "SGD update overflowed (target {target})"
            )));
        }
        self.updates += 1;
        Ok(())
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        linear_snapshot("sgd", &self.weights, self.bias, self.scaler.as_ref())
    }
}

/// Passive-Aggressive flavor: the exact step or the `C`-capped PA-I step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PaVariant {
    Pa,
    PaI,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PaParams {
    /// Width of the insensitive zone around the target.
    pub epsilon: f64,
    /// Step cap `C` (PA-I only).
    pub aggressiveness: f64,
    pub variant: PaVariant,
    pub standardize: bool,
}

impl Default for PaParams {
    fn default() -> Self {
        PaParams {
            epsilon: 0.1,
            aggressiveness: 1.0,
            variant: PaVariant::PaI,
            standardize: true,
        }
    }
}

/// Passive-Aggressive regressor with an epsilon-insensitive hinge loss.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PaRegressor {
    params: PaParams,
    weights: Vec<f64>,
    bias: f64,
    scaler: Option<RunningScaler>,
}

impl PaRegressor {
    pub fn new(dim: usize, params: PaParams) -> Self {
        let scaler = params.standardize.then(|| RunningScaler::new(dim));
        PaRegressor {
            params,
            weights: vec![0.0; dim],
            bias: 0.0,
            scaler,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn input(&self, features: &[f64]) -> Result<Vec<f64>> {
        match &self.scaler {
            Some(s) => s.standardize(features),
            None => {
                check_dim(self.weights.len(), features)?;
                Ok(features.to_vec())
            }
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        Ok(dot(&self.weights, &self.input(features)?) + self.bias)
    }

    pub fn learn(&mut self, features: &[f64], target: f64) -> Result<()> {
        let x = match &mut self.scaler {
            Some(s) => s.transform(features)?,
            None => {
                check_dim(self.weights.len(), features)?;
                features.to_vec()
            }
        };
        let prediction = dot(&self.weights, &x) + self.bias;
        let residual = target - prediction;
        let loss = residual.abs() - self.params.epsilon;
        if loss <= 0.0 {
            return Ok(());
        }
        // The +1 accounts for the implicit always-1 bias coordinate.
        let norm_sq = dot(&x, &x) + 1.0;
        let mut tau = loss / norm_sq;
        if self.params.variant == PaVariant::PaI {
            tau = tau.min(self.params.aggressiveness);
        }
        let step = tau * residual.signum();
        let old_bias = self.bias;
        let mut ok = true;
        for (w, &xi) in self.weights.iter_mut().zip(&x) {
            *w += step * xi;
            ok &= w.is_finite();
        }
        self.bias += step;
        ok &= self.bias.is_finite();
        if !ok {
            for (w, &xi) in self.weights.iter_mut().zip(&x) {
                *w -= step * xi;
            }
            self.bias = old_bias;
            return Err(Error::numeric(format!(
                "PA update overflowed (target {target})"
            )));
        }
        Ok(())
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        linear_snapshot("pa", &self.weights, self.bias, self.scaler.as_ref())
    }
}

fn check_dim(expected: usize, features: &[f64]) -> Result<()> {
    if features.len() != expected {
        return Err(Error::validation(format!(
            "model expects {expected} features, got {}",
            features.len()
        )));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn linear_snapshot(
    model: &str,
    weights: &[f64],
    bias: f64,
    scaler: Option<&RunningScaler>,
) -> ModelSnapshot {
    let state = json!({
        "weights": weights,
        "bias": bias,
        "scaler": scaler.map(|s| json!({
            "count": s.count,
            "means": s.means,
            "m2s": s.m2s,
        })),
    });
    ModelSnapshot::new(model, SnapshotCounts { nodes: 0, members: 1 }, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn raw_sgd(dim: usize, eta: f64) -> SgdRegressor {
        SgdRegressor::new(
            dim,
            SgdParams {
                learning_rate: eta,
                schedule: LearningRate::Constant,
                standardize: false,
            },
        )
    }

    fn raw_pa(dim: usize, params: PaParams) -> PaRegressor {
        PaRegressor::new(
            dim,
            PaParams {
                standardize: false,
                ..params
            },
        )
    }

    #[test]
    fn scaler_first_observation_maps_to_zero() {
        let mut scaler = RunningScaler::new(3);
        assert_eq!(scaler.transform(&[5.0, -2.0, 42.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn scaler_constant_stream_stays_zero() {
        let mut scaler = RunningScaler::new(1);
        for _ in 0..100 {
            assert_eq!(scaler.transform(&[7.0]).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn scaler_alternating_stream_converges_to_unit_scores() {
        let mut scaler = RunningScaler::new(1);
        let mut last = (0.0, 0.0);
        for i in 0..2_000 {
            let x = if i % 2 == 0 { 0.0 } else { 10.0 };
            let t = scaler.transform(&[x]).unwrap()[0];
            if i % 2 == 0 {
                last.0 = t;
            } else {
                last.1 = t;
            }
        }
        assert_relative_eq!(last.0, -1.0, epsilon = 5e-3);
        assert_relative_eq!(last.1, 1.0, epsilon = 5e-3);
    }

    #[test]
    fn scaler_rejects_dimension_mismatch() {
        let mut scaler = RunningScaler::new(2);
        assert!(scaler.transform(&[1.0]).is_err());
        assert!(scaler.standardize(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn sgd_zero_learning_rate_freezes_weights() {
        let mut model = raw_sgd(2, 0.0);
        for i in 0..50 {
            model.learn(&[i as f64, 1.0], 10.0).unwrap();
        }
        assert_eq!(model.weights(), &[0.0, 0.0]);
        assert_eq!(model.bias(), 0.0);
    }

    #[test]
    fn sgd_hand_computed_update() {
        let mut model = raw_sgd(1, 0.1);
        model.learn(&[1.0], 2.0).unwrap();
        assert_relative_eq!(model.weights()[0], 0.2, epsilon = 1e-12);
        assert_relative_eq!(model.bias(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn sgd_converges_on_noiseless_linear_stream() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut model = SgdRegressor::new(
            1,
            SgdParams {
                learning_rate: 0.05,
                schedule: LearningRate::Constant,
                standardize: true,
            },
        );
        let mut abs_err = 0.0;
        let n = 10_000;
        for _ in 0..n {
            let x = rng.random_range(0.0..10.0);
            let y = 3.0 * x;
            abs_err += (model.predict(&[x]).unwrap() - y).abs();
            model.learn(&[x], y).unwrap();
        }
        let range = 30.0;
        assert!(abs_err / n as f64 < 0.05 * range);
    }

    #[test]
    fn sgd_prequential_r2_recovers_affine_targets() {
        use crate::metrics::MetricAccumulator;
        use rand::{Rng, SeedableRng};
        for seed in 0..3u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = rng.random_range(0.5..5.0);
            let c = rng.random_range(-10.0..10.0);
            let mut model = SgdRegressor::new(1, SgdParams::default());
            let mut acc = MetricAccumulator::new();
            for _ in 0..10_000 {
                let x = rng.random_range(0.0..20.0);
                let y = a * x + c;
                acc.update(y, model.predict(&[x]).unwrap()).unwrap();
                model.learn(&[x], y).unwrap();
            }
            let r2 = acc.finalize(1.0).unwrap().metrics.r2.unwrap();
            assert!(r2 > 0.99, "seed {seed}: prequential R2 {r2}");
        }
    }

    #[test]
    fn pa_skips_updates_inside_the_insensitive_zone() {
        let mut model = raw_pa(1, PaParams::default());
        model.learn(&[1.0], 0.05).unwrap(); // |y - 0| = 0.05 <= eps
        assert_eq!(model.weights(), &[0.0]);
        assert_eq!(model.bias(), 0.0);
    }

    #[test]
    fn pa_hand_computed_update() {
        let mut model = raw_pa(
            2,
            PaParams {
                epsilon: 0.1,
                variant: PaVariant::Pa,
                ..PaParams::default()
            },
        );
        model.learn(&[1.0, 0.0], 1.0).unwrap();
        assert_relative_eq!(model.weights()[0], 0.45, epsilon = 1e-12);
        assert_relative_eq!(model.weights()[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(model.bias(), 0.45, epsilon = 1e-12);
    }

    #[test]
    fn pa_uncapped_update_lands_on_the_insensitive_boundary() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut model = raw_pa(
            3,
            PaParams {
                epsilon: 0.25,
                variant: PaVariant::Pa,
                ..PaParams::default()
            },
        );
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = rng.random_range(-5.0..5.0);
            model.learn(&x, y).unwrap();
            let after = model.predict(&x).unwrap();
            assert!((y - after).abs() <= 0.25 + 1e-9);
        }
    }

    #[test]
    fn pa_with_zero_aggressiveness_never_moves() {
        let mut model = raw_pa(
            2,
            PaParams {
                aggressiveness: 0.0,
                variant: PaVariant::PaI,
                ..PaParams::default()
            },
        );
        for i in 0..100 {
            model.learn(&[i as f64, -1.0], 50.0).unwrap();
        }
        assert_eq!(model.weights(), &[0.0, 0.0]);
        assert_eq!(model.bias(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = raw_sgd(3, 0.1);
        assert!(model.predict(&[1.0]).is_err());
        let mut model = raw_pa(2, PaParams::default());
        assert!(model.learn(&[1.0, 2.0, 3.0], 0.0).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn prediction_is_linear_with_zero_bias(
                w in prop::collection::vec(-3.0..3.0f64, 1..6),
                x in prop::collection::vec(-10.0..10.0f64, 6),
                alpha in -4.0..4.0f64,
            ) {
                let dim = w.len();
                let mut model = raw_sgd(dim, 0.0);
                model.weights = w;
                let x = &x[..dim];
                let scaled: Vec<f64> = x.iter().map(|v| v * alpha).collect();
                let lhs = model.predict(&scaled).unwrap();
                let rhs = alpha * model.predict(x).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
            }
        }
    }
}
