//! Incremental regression trees.
//!
//! [`HoeffdingTreeRegressor`] grows a binary tree one instance at a time.
//! Leaves keep per-feature split observers with a bounded set of candidate
//! thresholds; every `grace_period` instances the best and second-best
//! candidate splits by variance reduction are compared through the Hoeffding
//! bound, and the leaf splits once the best is confidently ahead (or the
//! bound undercuts the tie threshold).
//!
//! With [`HtParams::adaptive`] set, every internal node carries an ADWIN
//! detector over the tree's normalized absolute error and may grow an
//! alternate subtree after a change; the alternate replaces the node's
//! subtree once its recent prequential MAE is lower.

use crate::driftdetect::{AdwinDetector, DriftSignal};
use crate::error::{Error, Result};
use crate::linear::RunningScaler;
use crate::snapshot::{ModelSnapshot, SnapshotCounts};
use crate::stats::{GroupStats, RangeTracker};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::VecDeque;

/// Minimum variance reduction for a split candidate to count at all; guards
/// against floating-point residue on constant targets.
const MERIT_FLOOR: f64 = 1e-9;

/// Ring size for adjudicating an alternate subtree against its host node.
const ADJUDICATION_WINDOW: usize = 1000;

/// The Hoeffding bound: `eps = sqrt(R^2 * ln(1/delta) / (2n))`.
///
/// With probability `1 - delta` the observed mean of `n` samples of a
/// variable with range `R` is within `eps` of the true mean.
pub fn hoeffding_bound(range: f64, delta: f64, n: u64) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::validation("Hoeffding bound requires range > 0"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::validation("Hoeffding bound requires delta in (0, 1]"));
    }
    if n == 0 {
        return Err(Error::validation("Hoeffding bound requires n >= 1"));
    }
    Ok((range * range * (1.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// Leaf prediction strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LeafModel {
    /// Predict the mean target of the leaf.
    TargetMean,
    /// Predict with a per-leaf linear model trained by the delta rule on
    /// standardized features and target.
    Perceptron,
}

/// Hoeffding-tree hyperparameters.
#[derive(Debug, Clone, Serialize)]
pub struct HtParams {
    /// Split confidence `delta` for the Hoeffding bound.
    pub split_confidence: f64,
    /// Instances a leaf accumulates between split evaluations.
    pub grace_period: u32,
    /// Tie threshold `tau`: split anyway once the bound falls below it.
    pub tie_threshold: f64,
    pub leaf_model: LeafModel,
    pub depth_limit: u32,
    /// Maximum candidate thresholds stored per feature observer.
    pub threshold_cap: usize,
    /// Delta-rule step size for perceptron leaves.
    pub leaf_learning_rate: f64,
    /// Grow ADWIN detectors and alternate subtrees at internal nodes.
    pub adaptive: bool,
    /// Confidence of the per-node change detectors (adaptive mode).
    pub adaptive_delta: f64,
    /// Candidate features drawn per leaf; `None` observes all features.
    pub subspace: Option<usize>,
    /// Seed for subspace draws; unused when `subspace` is `None`.
    pub seed: u64,
}

impl Default for HtParams {
    fn default() -> Self {
        HtParams {
            split_confidence: 1e-7,
            grace_period: 200,
            tie_threshold: 0.05,
            leaf_model: LeafModel::TargetMean,
            depth_limit: 20,
            threshold_cap: 64,
            leaf_learning_rate: 0.02,
            adaptive: false,
            adaptive_delta: AdwinDetector::DEFAULT_DELTA,
            subspace: None,
            seed: 0,
        }
    }
}

impl HtParams {
    /// Defaults with per-node drift adaptation enabled.
    pub fn adaptive() -> Self {
        HtParams {
            adaptive: true,
            ..HtParams::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.split_confidence > 0.0 && self.split_confidence <= 1.0) {
            return Err(Error::validation("split_confidence must be in (0, 1]"));
        }
        if self.grace_period == 0 || self.depth_limit == 0 {
            return Err(Error::validation(
                "grace_period and depth_limit must be positive",
            ));
        }
        if self.threshold_cap < 2 {
            return Err(Error::validation("threshold_cap must be at least 2"));
        }
        if !(self.tie_threshold >= 0.0) {
            return Err(Error::validation("tie_threshold must be >= 0"));
        }
        if self.subspace == Some(0) {
            return Err(Error::validation("subspace size must be >= 1"));
        }
        Ok(())
    }
}

/// A candidate split: the threshold with the highest variance reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Variance reduction:
    /// `Var(parent) - (n_l/n) Var(left) - (n_r/n) Var(right)`.
    pub merit: f64,
}

/// Candidate-threshold statistics for one feature.
///
/// The first `cap` distinct values become candidate thresholds; later values
/// fold into the nearest candidate at or above them, with values beyond the
/// largest candidate kept in an overflow bin so that `x <= threshold`
/// partitions stay exact.
#[derive(Debug, Clone, Serialize)]
struct FeatureObserver {
    bins: Vec<(f64, GroupStats)>,
    overflow: GroupStats,
}

impl FeatureObserver {
    fn new() -> Self {
        FeatureObserver {
            bins: Vec::new(),
            overflow: GroupStats::default(),
        }
    }

    fn observe(&mut self, x: f64, y: f64, weight: f64, cap: usize) {
        match self
            .bins
            .binary_search_by(|probe| probe.0.partial_cmp(&x).expect("finite keys"))
        {
            Ok(i) => self.bins[i].1.add(y, weight),
            Err(i) => {
                if self.bins.len() < cap {
                    let mut stats = GroupStats::default();
                    stats.add(y, weight);
                    self.bins.insert(i, (x, stats));
                } else if i == self.bins.len() {
                    self.overflow.add(y, weight);
                } else {
                    self.bins[i].1.add(y, weight);
                }
            }
        }
    }

    /// Best threshold for this feature, given the leaf totals.
    fn best_threshold(&self, totals: &GroupStats) -> Option<(f64, f64)> {
        if self.bins.len() < 2 && self.overflow.is_empty() {
            return None;
        }
        let parent_variance = totals.variance();
        let floor = MERIT_FLOOR * (1.0 + parent_variance);
        let mut left = GroupStats::default();
        let mut best: Option<(f64, f64)> = None;
        for (key, stats) in &self.bins {
            left.merge(stats);
            let right = GroupStats {
                weight: totals.weight - left.weight,
                sum: totals.sum - left.sum,
                sq_sum: totals.sq_sum - left.sq_sum,
            };
            if left.weight < 1.0 || right.weight < 1.0 {
                continue;
            }
            let merit = parent_variance
                - left.weight / totals.weight * left.variance()
                - right.weight / totals.weight * right.variance();
            if merit > floor && best.map_or(true, |(_, m)| merit > m) {
                best = Some((*key, merit));
            }
        }
        best
    }

    fn candidate_count(&self) -> usize {
        self.bins.len()
    }
}

/// Running statistics of a learning leaf: target moments plus per-feature
/// split observers. Observer totals always equal the leaf totals.
#[derive(Debug, Clone, Serialize)]
pub struct LeafStats {
    totals: GroupStats,
    /// `(feature index, observer)`, ordered by feature index.
    observers: Vec<(usize, FeatureObserver)>,
}

impl LeafStats {
    fn new(active_features: Vec<usize>) -> Self {
        LeafStats {
            totals: GroupStats::default(),
            observers: active_features
                .into_iter()
                .map(|f| (f, FeatureObserver::new()))
                .collect(),
        }
    }

    fn seeded(active_features: Vec<usize>, totals: GroupStats) -> Self {
        let mut stats = Self::new(active_features);
        stats.totals = totals;
        stats
    }

    fn learn(&mut self, features: &[f64], target: f64, weight: f64, cap: usize) {
        self.totals.add(target, weight);
        for (feature, observer) in &mut self.observers {
            observer.observe(features[*feature], target, weight, cap);
        }
    }

    pub fn weight(&self) -> f64 {
        self.totals.weight
    }

    pub fn mean(&self) -> f64 {
        self.totals.mean()
    }

    /// The best candidate split over all observed features.
    ///
    /// Ties break towards the lowest feature index, then the lowest
    /// threshold. Returns `None` when fewer than two instances were seen or
    /// no candidate reduces variance.
    pub fn best_split(&self) -> Option<SplitCandidate> {
        self.top_two().map(|(best, _)| best)
    }

    /// Best candidate plus the merit of the runner-up feature (0 when no
    /// other feature offers a valid split).
    fn top_two(&self) -> Option<(SplitCandidate, f64)> {
        if self.totals.weight < 2.0 {
            return None;
        }
        let mut best: Option<SplitCandidate> = None;
        let mut second = 0.0f64;
        for (feature, observer) in &self.observers {
            if let Some((threshold, merit)) = observer.best_threshold(&self.totals) {
                match &best {
                    Some(b) if merit <= b.merit => second = second.max(merit),
                    _ => {
                        if let Some(b) = &best {
                            second = second.max(b.merit);
                        }
                        best = Some(SplitCandidate {
                            feature: *feature,
                            threshold,
                            merit,
                        });
                    }
                }
            }
        }
        best.map(|b| (b, second))
    }

    /// Left/right target statistics of the partition `x[feature] <= threshold`.
    fn partition(&self, feature: usize, threshold: f64) -> (GroupStats, GroupStats) {
        let observer = self
            .observers
            .iter()
            .find(|(f, _)| *f == feature)
            .map(|(_, o)| o)
            .expect("split feature must be observed");
        let mut left = GroupStats::default();
        for (key, stats) in &observer.bins {
            if *key <= threshold {
                left.merge(stats);
            }
        }
        let right = GroupStats {
            weight: self.totals.weight - left.weight,
            sum: self.totals.sum - left.sum,
            sq_sum: self.totals.sq_sum - left.sq_sum,
        };
        (left, right)
    }

    fn max_candidates(&self) -> usize {
        self.observers
            .iter()
            .map(|(_, o)| o.candidate_count())
            .max()
            .unwrap_or(0)
    }
}

/// Per-leaf linear model trained by the delta rule on standardized inputs.
#[derive(Debug, Clone, Serialize)]
struct LeafPerceptron {
    weights: Vec<f64>,
    bias: f64,
}

impl LeafPerceptron {
    fn new(dim: usize) -> Self {
        LeafPerceptron {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    fn output(&self, xs: &[f64]) -> f64 {
        self.weights.iter().zip(xs).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    fn train(&mut self, xs: &[f64], ys: f64, rate: f64, repeats: u32) {
        for _ in 0..repeats {
            let delta = rate * (ys - self.output(xs));
            for (w, &x) in self.weights.iter_mut().zip(xs) {
                *w += delta * x;
            }
            self.bias += delta;
        }
    }
}

/// Bounded ring of recent absolute errors with an O(1) mean.
#[derive(Debug, Clone, Serialize)]
struct ErrorRing {
    values: VecDeque<f64>,
    sum: f64,
}

impl ErrorRing {
    fn new() -> Self {
        ErrorRing {
            values: VecDeque::new(),
            sum: 0.0,
        }
    }

    fn push(&mut self, value: f64) {
        if self.values.len() == ADJUDICATION_WINDOW {
            self.sum -= self.values.pop_front().expect("nonempty ring");
        }
        self.values.push_back(value);
        self.sum += value;
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn mean(&self) -> f64 {
        if self.values.is_empty() {
            f64::INFINITY
        } else {
            self.sum / self.values.len() as f64
        }
    }
}

/// Drift bookkeeping attached to an internal node in adaptive mode.
#[derive(Debug, Clone, Serialize)]
struct AdaptiveState {
    detector: AdwinDetector,
    alternate: Option<Box<Node>>,
    node_errors: ErrorRing,
    alternate_errors: ErrorRing,
}

impl AdaptiveState {
    fn new(delta: f64) -> Self {
        AdaptiveState {
            detector: AdwinDetector::new(delta).expect("valid adaptive delta"),
            alternate: None,
            node_errors: ErrorRing::new(),
            alternate_errors: ErrorRing::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Leaf {
    stats: LeafStats,
    perceptron: Option<LeafPerceptron>,
    depth: u32,
    weight_since_eval: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Split {
    feature: usize,
    threshold: f64,
    depth: u32,
    left: Box<Node>,
    right: Box<Node>,
    adaptive: Option<Box<AdaptiveState>>,
}

#[derive(Debug, Clone, Serialize)]
enum Node {
    Leaf(Leaf),
    Split(Split),
}

impl Node {
    fn count(&self) -> u64 {
        match self {
            Node::Leaf(_) => 1,
            Node::Split(split) => {
                1 + split.left.count()
                    + split.right.count()
                    + split
                        .adaptive
                        .as_ref()
                        .and_then(|a| a.alternate.as_ref())
                        .map_or(0, |alt| alt.count())
            }
        }
    }

    fn leaf_weight_sum(&self) -> f64 {
        match self {
            Node::Leaf(leaf) => leaf.stats.weight(),
            Node::Split(split) => split.left.leaf_weight_sum() + split.right.leaf_weight_sum(),
        }
    }

    fn max_candidates(&self) -> usize {
        match self {
            Node::Leaf(leaf) => leaf.stats.max_candidates(),
            Node::Split(split) => split.left.max_candidates().max(split.right.max_candidates()),
        }
    }
}

/// Owned scalar context for one learning step; avoids borrowing the tree
/// while its node structure is being mutated.
struct LearnStep<'a> {
    features: &'a [f64],
    standardized: Option<Vec<f64>>,
    target: f64,
    standardized_target: f64,
    weight: f64,
    repeats: u32,
    /// Tree-level absolute prediction error (adaptive mode).
    abs_error: f64,
    /// The same error normalized by the running target range.
    normalized_error: f64,
    predict: PredictSetup,
    grace_period: f64,
    split_confidence: f64,
    tie_threshold: f64,
    depth_limit: u32,
    threshold_cap: usize,
    leaf_learning_rate: f64,
    adaptive: bool,
    adaptive_delta: f64,
    subspace: Option<usize>,
    dim: usize,
}

/// Everything a leaf needs to turn its state into a prediction.
#[derive(Clone, Copy)]
struct PredictSetup {
    leaf_model: LeafModel,
    /// `(mean, std)` of the target scaler; `None` before any data.
    target_scale: Option<(f64, f64)>,
    clamp: Option<(f64, f64)>,
}

fn leaf_output(leaf: &Leaf, standardized: Option<&[f64]>, setup: &PredictSetup) -> f64 {
    match setup.leaf_model {
        LeafModel::TargetMean => {
            if leaf.stats.weight() > 0.0 {
                leaf.stats.mean()
            } else {
                0.0
            }
        }
        LeafModel::Perceptron => match (leaf.perceptron.as_ref(), setup.target_scale) {
            (Some(p), Some((mean, std))) => {
                let xs = standardized.expect("standardized features in perceptron mode");
                let raw = p.output(xs) * std + mean;
                match setup.clamp {
                    Some((lo, hi)) => raw.clamp(lo, hi),
                    None => raw,
                }
            }
            _ => 0.0,
        },
    }
}

fn predict_node(node: &Node, features: &[f64], standardized: Option<&[f64]>, setup: &PredictSetup) -> f64 {
    let mut current = node;
    loop {
        match current {
            Node::Leaf(leaf) => return leaf_output(leaf, standardized, setup),
            Node::Split(split) => {
                current = if features[split.feature] <= split.threshold {
                    &split.left
                } else {
                    &split.right
                };
            }
        }
    }
}

/// Incremental regression tree; adaptive (drift-replacing) behavior is
/// selected through [`HtParams::adaptive`].
#[derive(Debug, Clone, Serialize)]
pub struct HoeffdingTreeRegressor {
    params: HtParams,
    dim: usize,
    root: Node,
    learned_weight: f64,
    target_range: RangeTracker,
    feature_scaler: Option<RunningScaler>,
    target_scaler: Option<RunningScaler>,
    #[serde(skip)]
    rng: Option<ChaCha8Rng>,
}

impl HoeffdingTreeRegressor {
    pub fn new(dim: usize, params: HtParams) -> Result<Self> {
        params.validate()?;
        if dim == 0 {
            return Err(Error::validation("tree needs at least one feature"));
        }
        let mut rng = params
            .subspace
            .map(|_| ChaCha8Rng::seed_from_u64(params.seed));
        let root = Node::Leaf(new_leaf(
            0,
            dim,
            params.subspace,
            params.leaf_model,
            &mut rng,
        ));
        let perceptron = params.leaf_model == LeafModel::Perceptron;
        Ok(HoeffdingTreeRegressor {
            params,
            dim,
            root,
            learned_weight: 0.0,
            target_range: RangeTracker::default(),
            feature_scaler: perceptron.then(|| RunningScaler::new(dim)),
            target_scaler: perceptron.then(|| RunningScaler::new(1)),
            rng,
        })
    }

    pub fn params(&self) -> &HtParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total training weight absorbed so far.
    pub fn learned_weight(&self) -> f64 {
        self.learned_weight
    }

    /// All tree nodes, including alternate subtrees.
    pub fn node_count(&self) -> u64 {
        self.root.count()
    }

    /// `(feature, threshold)` of the root split, if the root has split.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.root {
            Node::Split(split) => Some((split.feature, split.threshold)),
            Node::Leaf(_) => None,
        }
    }

    fn check_features(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.dim {
            return Err(Error::validation(format!(
                "tree expects {} features, got {}",
                self.dim,
                features.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("features must be finite"));
        }
        Ok(())
    }

    fn predict_setup(&self) -> PredictSetup {
        let target_scale = self.target_scaler.as_ref().and_then(|s| {
            if s.count() == 0 {
                None
            } else {
                Some((s.mean(0), s.std(0).max(1e-9)))
            }
        });
        let clamp = match (self.target_range.min(), self.target_range.max()) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            _ => None,
        };
        PredictSetup {
            leaf_model: self.params.leaf_model,
            target_scale,
            clamp,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        self.check_features(features)?;
        let setup = self.predict_setup();
        let standardized = match &self.feature_scaler {
            Some(s) => Some(s.standardize(features)?),
            None => None,
        };
        Ok(predict_node(
            &self.root,
            features,
            standardized.as_deref(),
            &setup,
        ))
    }

    pub fn learn(&mut self, features: &[f64], target: f64) -> Result<()> {
        self.learn_weighted(features, target, 1)
    }

    /// Learns one instance with integral weight `weight` (a weight of `k`
    /// is equivalent to presenting the instance `k` times).
    pub fn learn_weighted(&mut self, features: &[f64], target: f64, weight: u32) -> Result<()> {
        self.check_features(features)?;
        if !target.is_finite() {
            return Err(Error::validation("target must be finite"));
        }
        if weight == 0 {
            return Ok(());
        }

        let (abs_error, normalized_error) = if self.params.adaptive {
            let prediction = self.predict(features)?;
            self.target_range.observe(target);
            let abs_error = (prediction - target).abs();
            (abs_error, self.target_range.normalize_error(abs_error))
        } else {
            self.target_range.observe(target);
            (0.0, 0.0)
        };

        if let (Some(fs), Some(ts)) = (&mut self.feature_scaler, &mut self.target_scaler) {
            fs.observe(features)?;
            ts.observe(&[target])?;
        }

        let standardized = match &self.feature_scaler {
            Some(s) => Some(s.standardize(features)?),
            None => None,
        };
        let standardized_target = match &self.target_scaler {
            Some(s) => (target - s.mean(0)) / s.std(0).max(1e-9),
            None => 0.0,
        };

        let step = LearnStep {
            features,
            standardized,
            target,
            standardized_target,
            weight: weight as f64,
            repeats: weight,
            abs_error,
            normalized_error,
            predict: self.predict_setup(),
            grace_period: self.params.grace_period as f64,
            split_confidence: self.params.split_confidence,
            tie_threshold: self.params.tie_threshold,
            depth_limit: self.params.depth_limit,
            threshold_cap: self.params.threshold_cap,
            leaf_learning_rate: self.params.leaf_learning_rate,
            adaptive: self.params.adaptive,
            adaptive_delta: self.params.adaptive_delta,
            subspace: self.params.subspace,
            dim: self.dim,
        };
        learn_node(&mut self.root, &step, &mut self.rng);
        self.learned_weight += weight as f64;
        Ok(())
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        let state = serde_json::to_value(self).expect("tree state serializes");
        ModelSnapshot::new(
            if self.params.adaptive { "hat" } else { "ht" },
            SnapshotCounts {
                nodes: self.node_count(),
                members: 1,
            },
            state,
        )
    }

    #[cfg(test)]
    fn leaf_weight_sum(&self) -> f64 {
        self.root.leaf_weight_sum()
    }

    #[cfg(test)]
    fn max_candidates(&self) -> usize {
        self.root.max_candidates()
    }
}

fn new_leaf(
    depth: u32,
    dim: usize,
    subspace: Option<usize>,
    leaf_model: LeafModel,
    rng: &mut Option<ChaCha8Rng>,
) -> Leaf {
    let active = match subspace {
        Some(m) if m < dim => {
            let rng = rng.as_mut().expect("subspace mode carries an rng");
            let mut picked = rand::seq::index::sample(rng, dim, m).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..dim).collect(),
    };
    Leaf {
        stats: LeafStats::new(active),
        perceptron: (leaf_model == LeafModel::Perceptron).then(|| LeafPerceptron::new(dim)),
        depth,
        weight_since_eval: 0.0,
    }
}

fn learn_node(node: &mut Node, step: &LearnStep, rng: &mut Option<ChaCha8Rng>) {
    // Adaptive bookkeeping first: train/score the alternate, feed the
    // detector, and possibly promote the alternate in place of this subtree.
    if step.adaptive {
        let mut promoted: Option<Box<Node>> = None;
        if let Node::Split(split) = &mut *node {
            if let Some(state) = split.adaptive.as_deref_mut() {
                if let Some(alternate) = state.alternate.as_deref_mut() {
                    state.node_errors.push(step.abs_error);
                    let alt_prediction = predict_node(
                        alternate,
                        step.features,
                        step.standardized.as_deref(),
                        &step.predict,
                    );
                    state
                        .alternate_errors
                        .push((alt_prediction - step.target).abs());
                    learn_node(alternate, step, rng);
                }
                let signal = state
                    .detector
                    .update(step.normalized_error)
                    .expect("normalized error is finite");
                if signal == DriftSignal::Change {
                    match &state.alternate {
                        None => {
                            state.alternate = Some(Box::new(Node::Leaf(new_leaf(
                                split.depth,
                                step.dim,
                                step.subspace,
                                step.predict.leaf_model,
                                rng,
                            ))));
                            state.node_errors = ErrorRing::new();
                            state.alternate_errors = ErrorRing::new();
                        }
                        Some(_) => {
                            if state.alternate_errors.len() > 0
                                && state.alternate_errors.mean() < state.node_errors.mean()
                            {
                                promoted = state.alternate.take();
                            }
                        }
                    }
                }
            }
        }
        if let Some(alternate) = promoted {
            debug_assert!(alternate.count() < node.count());
            // The alternate has already learned this instance.
            *node = *alternate;
            return;
        }
    }

    match &mut *node {
        Node::Split(split) => {
            let child = if step.features[split.feature] <= split.threshold {
                &mut split.left
            } else {
                &mut split.right
            };
            learn_node(child, step, rng);
        }
        Node::Leaf(leaf) => {
            leaf.stats
                .learn(step.features, step.target, step.weight, step.threshold_cap);
            if let Some(perceptron) = &mut leaf.perceptron {
                perceptron.train(
                    step.standardized.as_deref().expect("standardized features"),
                    step.standardized_target,
                    step.leaf_learning_rate,
                    step.repeats,
                );
            }
            leaf.weight_since_eval += step.weight;
            if leaf.weight_since_eval >= step.grace_period && leaf.depth < step.depth_limit {
                leaf.weight_since_eval = 0.0;
                if let Some(split_node) = try_split(leaf, step, rng) {
                    *node = split_node;
                }
            }
        }
    }
}

/// Evaluates the Hoeffding split decision at a leaf; returns the replacement
/// split node when the decision fires.
fn try_split(leaf: &mut Leaf, step: &LearnStep, rng: &mut Option<ChaCha8Rng>) -> Option<Node> {
    let (best, second_merit) = leaf.stats.top_two()?;
    let n = leaf.stats.weight() as u64;
    let epsilon =
        hoeffding_bound(1.0, step.split_confidence, n.max(1)).expect("valid bound inputs");
    // Merits are compared as the ratio second/best against 1 - eps, which
    // bounds the range of the statistic to [0, 1].
    let ratio = second_merit / best.merit;
    if !(ratio < 1.0 - epsilon || epsilon < step.tie_threshold) {
        return None;
    }

    let (left_stats, right_stats) = leaf.stats.partition(best.feature, best.threshold);
    let make_child = |totals: GroupStats, rng: &mut Option<ChaCha8Rng>| -> Box<Node> {
        let mut child = new_leaf(
            leaf.depth + 1,
            step.dim,
            step.subspace,
            step.predict.leaf_model,
            rng,
        );
        child.stats = LeafStats::seeded(
            child.stats.observers.iter().map(|(f, _)| *f).collect(),
            totals,
        );
        child.perceptron = leaf.perceptron.clone();
        Box::new(Node::Leaf(child))
    };
    let left = make_child(left_stats, rng);
    let right = make_child(right_stats, rng);
    Some(Node::Split(Split {
        feature: best.feature,
        threshold: best.threshold,
        depth: leaf.depth,
        left,
        right,
        adaptive: step
            .adaptive
            .then(|| Box::new(AdaptiveState::new(step.adaptive_delta))),
    }))
}
