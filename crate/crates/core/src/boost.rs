//! Boosted stump trainers over binned features.
//!
//! Four modes share one engine:
//! - `Cyclic`: round-robin over features, one bagged stump per feature per
//!   cycle (EBM style).
//! - `BestFirst`: each round updates only the feature whose stump has the
//!   largest gain.
//! - `Newton`: stagewise second-order boosting, max-gain stump over all
//!   features per round (depth-1 XGBoost style).
//! - `NewtonOneFeature`: as `Newton` but each tree sees one random feature.
//!
//! A "stump" here splits the binned axis into at most `leaves_per_stump`
//! contiguous leaves. Leaf values are Newton steps `-G/(H+lambda)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BinnedDataset, CategoricalEncoding, FeatureBins};
use crate::error::{Error, Result};
use crate::model::{logistic, AdditiveModel, BinLayout, FeatureShape, ShapeFunction};
use crate::seed;

pub const HESSIAN_FLOOR: f64 = 1e-6;
/// Minimum validation-loss decrease that resets the patience counter.
pub const EARLY_STOP_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostMode {
    Cyclic,
    BestFirst,
    Newton,
    NewtonOneFeature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub learning_rate: f64,
    /// Cycles for `Cyclic`, trees for the Newton modes. `BestFirst` runs up
    /// to `max_rounds * D` single-feature rounds.
    pub max_rounds: usize,
    /// Same unit as `max_rounds` (scaled by `D` for `BestFirst`).
    pub patience: usize,
    /// Bootstrap replicates of the whole run, averaged. `1` trains once on
    /// the full training split.
    pub outer_bags: usize,
    /// Bootstrap subsamples per feature update whose stumps are averaged.
    /// `0` or `1` fits the update on the bag itself.
    pub inner_bags: usize,
    pub leaves_per_stump: usize,
    pub newton_lambda: f64,
    pub mode: BoostMode,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            learning_rate: 0.01,
            max_rounds: 2000,
            patience: 50,
            outer_bags: 8,
            inner_bags: 8,
            leaves_per_stump: 3,
            newton_lambda: 1.0,
            mode: BoostMode::Cyclic,
            seed: 0,
        }
    }
}

impl BoostConfig {
    /// The full-scale settings: 100 outer and inner bags, 30000 rounds.
    pub fn paper_scale(mut self) -> Self {
        self.outer_bags = 100;
        self.inner_bags = 100;
        self.max_rounds = 30_000;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if self.leaves_per_stump < 2 {
            return Err(Error::Config("leaves_per_stump must be >= 2".into()));
        }
        if self.outer_bags < 1 {
            return Err(Error::Config("outer_bags must be >= 1".into()));
        }
        if !(self.newton_lambda >= 0.0) {
            return Err(Error::Config("newton_lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-bin gradient and hessian sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Histogram {
    pub fn zeros(n_bins: usize) -> Self {
        Histogram {
            grad: vec![0.0; n_bins],
            hess: vec![0.0; n_bins],
        }
    }

    pub fn from_rows(bins: &[u16], g: &[f64], h: &[f64], n_bins: usize) -> Self {
        let mut hist = Histogram::zeros(n_bins);
        for ((&b, &gi), &hi) in bins.iter().zip(g).zip(h) {
            hist.grad[b as usize] += gi;
            hist.hess[b as usize] += hi;
        }
        hist
    }

    pub fn n_bins(&self) -> usize {
        self.grad.len()
    }
}

/// A piecewise-constant update over one feature's bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Stump {
    /// Cut positions `c` in bin space: bins `< c` go left.
    pub cuts: Vec<usize>,
    pub leaf_values: Vec<f64>,
    /// Improvement of `sum G^2/(H+lambda)` over the unsplit root.
    pub gain: f64,
}

impl Stump {
    pub fn per_bin(&self, n_bins: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n_bins);
        let mut leaf = 0;
        for b in 0..n_bins {
            while leaf < self.cuts.len() && b >= self.cuts[leaf] {
                leaf += 1;
            }
            out.push(self.leaf_values[leaf]);
        }
        out
    }
}

#[inline]
fn leaf_score(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        g * g / d
    } else {
        0.0
    }
}

#[inline]
fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        -g / d
    } else {
        0.0
    }
}

/// Best stump for one feature given per-row bins, gradients and hessians.
pub fn best_stump(bins: &[u16], g: &[f64], h: &[f64], n_bins: usize, leaves: usize, lambda: f64) -> Stump {
    best_split(&Histogram::from_rows(bins, g, h, n_bins), leaves, lambda)
}

/// Optimal partition of the binned axis into at most `leaves` contiguous
/// leaves, maximizing `sum G^2/(H+lambda)`.
///
/// Exact dynamic program over the non-empty bins. Ties prefer fewer leaves,
/// then the lexicographically smallest cut vector, which places each cut
/// directly after the last non-empty bin on its left.
pub fn best_split(hist: &Histogram, leaves: usize, lambda: f64) -> Stump {
    let nonempty: Vec<usize> = (0..hist.n_bins()).filter(|&b| hist.hess[b] > 0.0).collect();
    let m = nonempty.len();
    let mut pg = Vec::with_capacity(m + 1);
    let mut ph = Vec::with_capacity(m + 1);
    pg.push(0.0);
    ph.push(0.0);
    for &b in &nonempty {
        pg.push(pg.last().unwrap() + hist.grad[b]);
        ph.push(ph.last().unwrap() + hist.hess[b]);
    }
    let seg = |a: usize, b: usize| leaf_score(pg[b] - pg[a], ph[b] - ph[a], lambda);
    let root = seg(0, m);
    let max_leaves = leaves.min(m).max(1);

    // value[k][i]: best total over the first i non-empty bins with k+1 leaves.
    let mut value = vec![vec![f64::NEG_INFINITY; m + 1]; max_leaves];
    let mut parent = vec![vec![0usize; m + 1]; max_leaves];
    for i in 1..=m {
        value[0][i] = seg(0, i);
    }
    let cuts_of = |parent: &Vec<Vec<usize>>, k: usize, i: usize| -> Vec<usize> {
        let mut cuts = Vec::with_capacity(k);
        let (mut k, mut i) = (k, i);
        while k > 0 {
            let j = parent[k][i];
            cuts.push(j);
            i = j;
            k -= 1;
        }
        cuts.reverse();
        cuts
    };
    for k in 1..max_leaves {
        let ends: Vec<usize> = if k + 1 == max_leaves {
            vec![m]
        } else {
            (k + 1..=m).collect()
        };
        for i in ends {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for j in k..i {
                let v = value[k - 1][j] + seg(j, i);
                if v > best {
                    best = v;
                    arg = j;
                } else if v == best {
                    let mut a = cuts_of(&parent, k - 1, j);
                    a.push(j);
                    let mut b = cuts_of(&parent, k - 1, arg);
                    b.push(arg);
                    if a < b {
                        arg = j;
                    }
                }
            }
            value[k][i] = best;
            parent[k][i] = arg;
        }
    }

    let mut best_k = 0;
    for k in 1..max_leaves {
        if value[k][m] > value[best_k][m] {
            best_k = k;
        }
    }
    if m == 0 {
        return Stump {
            cuts: Vec::new(),
            leaf_values: vec![0.0],
            gain: 0.0,
        };
    }
    let compressed = cuts_of(&parent, best_k, m);
    let mut bounds = vec![0];
    bounds.extend(&compressed);
    bounds.push(m);
    let leaf_values = bounds
        .windows(2)
        .map(|w| leaf_value(pg[w[1]] - pg[w[0]], ph[w[1]] - ph[w[0]], lambda))
        .collect();
    Stump {
        cuts: compressed.iter().map(|&t| nonempty[t - 1] + 1).collect(),
        leaf_values,
        gain: value[best_k][m] - root,
    }
}

/// Working gradient state for logistic loss.
#[derive(Debug, Clone)]
pub struct GradientState {
    pub scores: Vec<f64>,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl GradientState {
    pub fn new(scores: Vec<f64>) -> Self {
        let n = scores.len();
        GradientState {
            scores,
            grad: vec![0.0; n],
            hess: vec![0.0; n],
        }
    }

    pub fn refresh(&mut self, labels: &[f64]) {
        for ((s, y), (g, h)) in self
            .scores
            .iter()
            .zip(labels)
            .zip(self.grad.iter_mut().zip(self.hess.iter_mut()))
        {
            let p = logistic(*s);
            *g = p - y;
            *h = (p * (1.0 - p)).max(HESSIAN_FLOOR);
        }
    }
}

/// Logistic loss of a log-odds score against a (possibly soft) label.
pub fn score_loss(score: f64, y: f64) -> f64 {
    let softplus = score.max(0.0) + (-score.abs()).exp().ln_1p();
    softplus - y * score
}

/// Per-bag bookkeeping, useful for tests and diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoostTrace {
    /// Stump updates applied per feature (including those after the best
    /// validation round).
    pub updates: Vec<usize>,
    /// `updates` as of the best validation round, i.e. the updates that
    /// survive into the returned model.
    pub best_updates: Vec<usize>,
    /// Rounds (cycles for `Cyclic`) executed.
    pub rounds: usize,
    pub best_round: usize,
    pub best_val_loss: f64,
}

pub fn fit_cyclic(data: &BinnedDataset, cfg: &BoostConfig) -> Result<AdditiveModel> {
    fit_mode(data, cfg, BoostMode::Cyclic)
}

pub fn fit_best_first(data: &BinnedDataset, cfg: &BoostConfig) -> Result<AdditiveModel> {
    fit_mode(data, cfg, BoostMode::BestFirst)
}

/// `cfg.mode` must be `Newton` or `NewtonOneFeature`.
pub fn fit_newton(data: &BinnedDataset, cfg: &BoostConfig) -> Result<AdditiveModel> {
    match cfg.mode {
        BoostMode::Newton | BoostMode::NewtonOneFeature => fit_mode(data, cfg, cfg.mode),
        other => Err(Error::Config(format!("fit_newton called with mode {other:?}"))),
    }
}

fn fit_mode(data: &BinnedDataset, cfg: &BoostConfig, mode: BoostMode) -> Result<AdditiveModel> {
    let cfg = BoostConfig { mode, ..cfg.clone() };
    fit_boosted(data, &cfg).map(|(m, _)| m)
}

/// Train with `cfg.mode`, returning the centered model and a trace per
/// outer bag.
pub fn fit_boosted(data: &BinnedDataset, cfg: &BoostConfig) -> Result<(AdditiveModel, Vec<BoostTrace>)> {
    cfg.validate()?;
    let train = &data.split.train;
    let val = &data.split.val;
    if train.is_empty() {
        return Err(Error::Training("no training rows".into()));
    }
    if val.is_empty() {
        return Err(Error::Training("no validation rows".into()));
    }
    if data.n_features() == 0 {
        return Err(Error::Training("no features".into()));
    }
    let labels = data.labels();
    let y_train: Vec<f64> = train.iter().map(|&r| labels[r]).collect();
    let rate = y_train.iter().sum::<f64>() / y_train.len() as f64;
    if rate <= 0.0 || rate >= 1.0 {
        return Err(Error::Training("training labels contain a single class".into()));
    }
    let intercept = (rate / (1.0 - rate)).ln();

    let engine = Engine::new(data, cfg, intercept);
    let mut sums: Vec<Vec<f64>> = engine.feature_bins.iter().map(|&n| vec![0.0; n]).collect();
    let mut traces = Vec::with_capacity(cfg.outer_bags);
    for bag in 0..cfg.outer_bags {
        let mut rng = seed::rng_for(cfg.seed, bag as u64);
        let n = train.len();
        let bag_rows: Vec<u32> = if cfg.outer_bags == 1 {
            (0..n as u32).collect()
        } else {
            (0..n).map(|_| rng.random_range(0..n as u32)).collect()
        };
        let (shapes, trace) = engine.run_bag(&bag_rows, &mut rng);
        for (s, v) in sums.iter_mut().zip(&shapes) {
            for (a, b) in s.iter_mut().zip(v) {
                *a += b;
            }
        }
        traces.push(trace);
    }
    let bags = cfg.outer_bags as f64;
    let features = data
        .spec
        .features
        .iter()
        .zip(sums)
        .map(|(f, s)| FeatureShape {
            name: f.name.clone(),
            shape: ShapeFunction::Binned {
                layout: BinLayout::from_bins(&f.bins),
                values: s.into_iter().map(|v| v / bags).collect(),
            },
        })
        .collect();
    let model = AdditiveModel {
        algorithm: mode_name(cfg.mode).to_string(),
        seed: cfg.seed,
        intercept,
        features,
        config_digest: String::new(),
        binning_digest: data.spec.digest(),
    };
    Ok((model.center(&data.raw, train)?, traces))
}

fn mode_name(mode: BoostMode) -> &'static str {
    match mode {
        BoostMode::Cyclic => "ebm",
        BoostMode::BestFirst => "ebm-bf",
        BoostMode::Newton => "xgb",
        BoostMode::NewtonOneFeature => "xgb-l2",
    }
}

/// Boosting works on "units": one per feature, except that a one-hot
/// encoded categorical contributes one two-bin indicator unit per category.
struct Engine<'a> {
    cfg: &'a BoostConfig,
    /// Bins per unit.
    n_bins: Vec<usize>,
    /// `train_bins[u][i]` for the i-th training row.
    train_bins: Vec<Vec<u16>>,
    val_bins: Vec<Vec<u16>>,
    unit_feature: Vec<usize>,
    /// Feature bin -> unit bin.
    unit_map: Vec<Vec<u16>>,
    feature_bins: Vec<usize>,
    y_train: Vec<f64>,
    y_val: Vec<f64>,
    intercept: f64,
}

impl<'a> Engine<'a> {
    fn new(data: &BinnedDataset, cfg: &'a BoostConfig, intercept: f64) -> Self {
        let mut engine = Engine {
            cfg,
            n_bins: Vec::new(),
            train_bins: Vec::new(),
            val_bins: Vec::new(),
            unit_feature: Vec::new(),
            unit_map: Vec::new(),
            feature_bins: data.spec.features.iter().map(|f| f.n_bins()).collect(),
            y_train: data.split.train.iter().map(|&r| data.labels()[r]).collect(),
            y_val: data.split.val.iter().map(|&r| data.labels()[r]).collect(),
            intercept,
        };
        for (j, f) in data.spec.features.iter().enumerate() {
            let n = f.n_bins();
            let maps: Vec<Vec<u16>> = match &f.bins {
                FeatureBins::Categorical {
                    categories,
                    encoding: CategoricalEncoding::OneHot,
                } if categories.len() > 1 => (0..categories.len())
                    .map(|c| (0..n).map(|b| u16::from(b == c)).collect())
                    .collect(),
                _ => vec![(0..n as u16).collect()],
            };
            for map in maps {
                let pick =
                    |rows: &[usize]| -> Vec<u16> { rows.iter().map(|&r| map[data.bins[j][r] as usize]).collect() };
                engine.train_bins.push(pick(&data.split.train));
                engine.val_bins.push(pick(&data.split.val));
                engine.n_bins.push(*map.iter().max().unwrap() as usize + 1);
                engine.unit_feature.push(j);
                engine.unit_map.push(map);
            }
        }
        engine
    }

    fn bag_histogram(&self, j: usize, state: &GradientState, rows: &[u32]) -> Histogram {
        let bins = &self.train_bins[j];
        let mut hist = Histogram::zeros(self.n_bins[j]);
        for &r in rows {
            let r = r as usize;
            let b = bins[r] as usize;
            hist.grad[b] += state.grad[r];
            hist.hess[b] += state.hess[r];
        }
        hist
    }

    fn inner_bagged_delta(&self, j: usize, state: &GradientState, bag: &[u32], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n_bins = self.n_bins[j];
        let (leaves, lambda) = (self.cfg.leaves_per_stump, self.cfg.newton_lambda);
        if self.cfg.inner_bags <= 1 {
            return best_split(&self.bag_histogram(j, state, bag), leaves, lambda).per_bin(n_bins);
        }
        let bins = &self.train_bins[j];
        let mut avg = vec![0.0; n_bins];
        for _ in 0..self.cfg.inner_bags {
            let mut hist = Histogram::zeros(n_bins);
            for _ in 0..bag.len() {
                let r = bag[rng.random_range(0..bag.len())] as usize;
                let b = bins[r] as usize;
                hist.grad[b] += state.grad[r];
                hist.hess[b] += state.hess[r];
            }
            for (a, d) in avg.iter_mut().zip(best_split(&hist, leaves, lambda).per_bin(n_bins)) {
                *a += d;
            }
        }
        let k = self.cfg.inner_bags as f64;
        avg.iter_mut().for_each(|a| *a /= k);
        avg
    }

    fn apply(
        &self,
        u: usize,
        delta: &[f64],
        shapes: &mut [Vec<f64>],
        train: &mut GradientState,
        val_scores: &mut [f64],
    ) {
        let lr = self.cfg.learning_rate;
        let shape = &mut shapes[self.unit_feature[u]];
        for (s, &m) in shape.iter_mut().zip(&self.unit_map[u]) {
            *s += lr * delta[m as usize];
        }
        for (s, &b) in train.scores.iter_mut().zip(&self.train_bins[u]) {
            *s += lr * delta[b as usize];
        }
        for (s, &b) in val_scores.iter_mut().zip(&self.val_bins[u]) {
            *s += lr * delta[b as usize];
        }
    }

    fn val_loss(&self, scores: &[f64]) -> f64 {
        scores
            .iter()
            .zip(&self.y_val)
            .map(|(&s, &y)| score_loss(s, y))
            .sum::<f64>()
            / scores.len() as f64
    }

    fn run_bag(&self, bag: &[u32], rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, BoostTrace) {
        let d = self.n_bins.len();
        let mode = self.cfg.mode;
        let mut shapes: Vec<Vec<f64>> = self.feature_bins.iter().map(|&n| vec![0.0; n]).collect();
        let mut state = GradientState::new(vec![self.intercept; self.y_train.len()]);
        let mut val_scores = vec![self.intercept; self.y_val.len()];
        let mut best_loss = self.val_loss(&val_scores);
        let mut best_shapes = shapes.clone();
        let mut trace = BoostTrace {
            updates: vec![0; self.feature_bins.len()],
            best_updates: vec![0; self.feature_bins.len()],
            best_val_loss: best_loss,
            ..Default::default()
        };
        let (max_rounds, patience) = match mode {
            BoostMode::BestFirst => (self.cfg.max_rounds * d, self.cfg.patience * d),
            _ => (self.cfg.max_rounds, self.cfg.patience),
        };
        let (leaves, lambda) = (self.cfg.leaves_per_stump, self.cfg.newton_lambda);
        let mut since_best = 0;
        for round in 0..max_rounds {
            match mode {
                BoostMode::Cyclic => {
                    for j in 0..d {
                        state.refresh(&self.y_train);
                        let delta = self.inner_bagged_delta(j, &state, bag, rng);
                        self.apply(j, &delta, &mut shapes, &mut state, &mut val_scores);
                        trace.updates[self.unit_feature[j]] += 1;
                    }
                }
                BoostMode::BestFirst => {
                    state.refresh(&self.y_train);
                    let j = self.argmax_gain(&state, bag);
                    let delta = self.inner_bagged_delta(j, &state, bag, rng);
                    self.apply(j, &delta, &mut shapes, &mut state, &mut val_scores);
                    trace.updates[self.unit_feature[j]] += 1;
                }
                BoostMode::Newton => {
                    state.refresh(&self.y_train);
                    let j = self.argmax_gain(&state, bag);
                    let delta = best_split(&self.bag_histogram(j, &state, bag), leaves, lambda).per_bin(self.n_bins[j]);
                    self.apply(j, &delta, &mut shapes, &mut state, &mut val_scores);
                    trace.updates[self.unit_feature[j]] += 1;
                }
                BoostMode::NewtonOneFeature => {
                    state.refresh(&self.y_train);
                    let j = rng.random_range(0..d);
                    let delta = best_split(&self.bag_histogram(j, &state, bag), leaves, lambda).per_bin(self.n_bins[j]);
                    self.apply(j, &delta, &mut shapes, &mut state, &mut val_scores);
                    trace.updates[self.unit_feature[j]] += 1;
                }
            }
            trace.rounds = round + 1;
            let loss = self.val_loss(&val_scores);
            if loss < best_loss - EARLY_STOP_TOLERANCE {
                best_loss = loss;
                best_shapes.clone_from(&shapes);
                trace.best_round = round + 1;
                trace.best_updates.clone_from(&trace.updates);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    break;
                }
            }
        }
        trace.best_val_loss = best_loss;
        (best_shapes, trace)
    }

    /// Feature with the largest stump gain on the bag; lowest index wins ties.
    fn argmax_gain(&self, state: &GradientState, bag: &[u32]) -> usize {
        let (leaves, lambda) = (self.cfg.leaves_per_stump, self.cfg.newton_lambda);
        let mut best = (0, f64::NEG_INFINITY);
        for j in 0..self.n_bins.len() {
            let gain = best_split(&self.bag_histogram(j, state, bag), leaves, lambda).gain;
            if gain > best.1 {
                best = (j, gain);
            }
        }
        best.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn two_group_split() {
        let bins = [0u16, 0, 1, 1];
        let g = [-1.0, -1.0, 1.0, 1.0];
        let h = [1.0; 4];
        let s = best_stump(&bins, &g, &h, 2, 2, 0.0);
        assert_eq!(s.cuts, vec![1]);
        assert_eq!(s.leaf_values, vec![1.0, -1.0]);
        assert_eq!(s.gain, 4.0);
        assert_eq!(s.per_bin(2), vec![1.0, -1.0]);
    }

    #[test]
    fn constant_gradient_has_no_structure() {
        let bins: Vec<u16> = (0..40).map(|i| (i % 8) as u16).collect();
        let g = vec![0.3; 40];
        let h = vec![0.5; 40];
        let s = best_stump(&bins, &g, &h, 8, 3, 1.0);
        assert!(s.cuts.is_empty());
        assert_eq!(s.gain, 0.0);
        let expected = -12.0 / (20.0 + 1.0);
        assert!((s.leaf_values[0] - expected).abs() < 1e-15);
        let s0 = best_stump(&bins, &g, &h, 8, 3, 0.0);
        assert!(s0.gain.abs() < 1e-12);
        for v in s0.per_bin(8) {
            assert!((v + 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn single_bin_is_constant_leaf() {
        let s = best_stump(&[0, 0, 0], &[1.0, 2.0, 3.0], &[1.0; 3], 1, 3, 0.0);
        assert!(s.cuts.is_empty());
        assert_eq!(s.gain, 0.0);
        assert_eq!(s.leaf_values, vec![-2.0]);
    }

    #[test]
    fn empty_bins_cut_after_last_occupied_bin() {
        // Occupied bins 0 and 3; any cut in 1..=3 is equivalent.
        let s = best_stump(&[0, 3], &[-1.0, 1.0], &[1.0, 1.0], 5, 3, 0.0);
        assert_eq!(s.cuts, vec![1]);
        assert_eq!(s.per_bin(5), vec![1.0, -1.0, -1.0, -1.0, -1.0]);
    }

    #[test]
    fn stump_updates_never_increase_bag_loss() {
        // leaves = 2, lambda >= 0, learning rate 1 or smaller.
        let mut rng = seed::rng(11);
        for trial in 0..200 {
            let n = 60;
            let n_bins = 6;
            let bins: Vec<u16> = (0..n).map(|_| rng.random_range(0..n_bins as u16)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..2) as f64).collect();
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut state = GradientState::new(scores);
            let lambda = [0.0, 0.5, 2.0][trial % 3];
            for _ in 0..5 {
                state.refresh(&y);
                let before: f64 = state.scores.iter().zip(&y).map(|(&s, &t)| score_loss(s, t)).sum();
                let delta = best_stump(&bins, &state.grad, &state.hess, n_bins, 2, lambda).per_bin(n_bins);
                for (s, &b) in state.scores.iter_mut().zip(&bins) {
                    *s += 0.5 * delta[b as usize];
                }
                let after: f64 = state.scores.iter().zip(&y).map(|(&s, &t)| score_loss(s, t)).sum();
                assert!(after <= before + 1e-9, "trial {trial}: {before} -> {after}");
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(BoostConfig::default().validate().is_ok());
        let bad = BoostConfig {
            leaves_per_stump: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = BoostConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let paper = BoostConfig::default().paper_scale();
        assert_eq!(
            (paper.outer_bags, paper.inner_bags, paper.max_rounds),
            (100, 100, 30_000)
        );
    }
}
