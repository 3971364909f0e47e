//! Fused-lasso additive model: one weight per unique training value of each
//! feature with an l1 penalty on differences of adjacent weights.
//!
//! Objective for a fixed `lambda`:
//! `mean_i logloss(y_i, b + sum_j theta_j[x_ij]) + lambda * sum_j TV(theta_j)`.
//! Block coordinate descent: each block step minimizes a second-order
//! expansion of the loss in that block plus its TV penalty, solved exactly by
//! [`tv_denoise_1d`]. A step that fails to decrease the true objective
//! falls back to the curvature-bound (1/4) majorizer, which always does.

use serde::{Deserialize, Serialize};

use crate::boost::score_loss;
use crate::data::{stratified_partition, BinnedDataset, ColumnData, FeatureBins, Value};
use crate::error::{Error, Result};
use crate::model::{logistic, AdditiveModel, BinLayout, FeatureShape, ShapeFunction};
use crate::smooth::tv::{saturation_lambda, tv_denoise_1d};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlamConfig {
    pub path_length: usize,
    /// `lambda_min = min_ratio * lambda_max`.
    pub min_ratio: f64,
    /// Share of the training rows held out to choose `lambda`.
    pub validation_fraction: f64,
    pub max_sweeps: usize,
    /// Relative objective change that ends the sweeps for one `lambda`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for FlamConfig {
    fn default() -> Self {
        FlamConfig {
            path_length: 100,
            min_ratio: 1e-4,
            validation_fraction: 0.15,
            max_sweeps: 200,
            tolerance: 1e-7,
            seed: 0,
        }
    }
}

impl FlamConfig {
    pub fn desk() -> Self {
        FlamConfig {
            path_length: 40,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.path_length < 1 {
            return Err(Error::Config("FLAM path_length must be >= 1".into()));
        }
        if !(self.min_ratio > 0.0 && self.min_ratio < 1.0) {
            return Err(Error::Config("FLAM min_ratio must be in (0,1)".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("FLAM validation_fraction must be in (0,1)".into()));
        }
        Ok(())
    }

    /// Log-spaced, strictly decreasing from `lambda_max`.
    pub fn path(&self, lambda_max: f64) -> Vec<f64> {
        if self.path_length == 1 {
            return vec![lambda_max];
        }
        let steps = (self.path_length - 1) as f64;
        (0..self.path_length)
            .map(|k| lambda_max * self.min_ratio.powf(k as f64 / steps))
            .collect()
    }
}

/// Result of a full path fit.
#[derive(Debug, Clone)]
pub struct FlamFit {
    pub model: AdditiveModel,
    pub lambdas: Vec<f64>,
    /// Held-out logistic loss per path point.
    pub holdout_loss: Vec<f64>,
    pub selected: usize,
    /// False when some path point hit `max_sweeps`.
    pub converged: bool,
}

/// One TV-chained parameter block. Parameters are ordered along the chain;
/// `row_param[i]` is the parameter used by problem row `i`.
#[derive(Debug, Clone)]
struct Block {
    feature: usize,
    row_param: Vec<u32>,
    theta: Vec<f64>,
    kind: BlockKind,
}

#[derive(Debug, Clone)]
enum BlockKind {
    /// Chain over `[missing?] ++ levels`.
    Numeric { levels: Vec<f64>, has_missing: bool },
    /// One-hot indicator for `category`: chain `[off, on]`.
    Indicator { category: usize },
}

struct Problem<'a> {
    data: &'a BinnedDataset,
    rows: Vec<usize>,
    y: Vec<f64>,
    blocks: Vec<Block>,
    intercept: f64,
    scores: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(data: &'a BinnedDataset, rows: Vec<usize>) -> Result<Self> {
        let labels = data.labels();
        let y: Vec<f64> = rows.iter().map(|&r| labels[r]).collect();
        let rate = y.iter().sum::<f64>() / y.len() as f64;
        if rate <= 0.0 || rate >= 1.0 {
            return Err(Error::Training("training labels contain a single class".into()));
        }
        let mut blocks = Vec::new();
        for j in 0..data.n_features() {
            let col = data.column(j);
            match (&col.data, &data.feature(j).bins) {
                (ColumnData::Numeric(_), _) => {
                    let mut levels: Vec<f64> = rows
                        .iter()
                        .filter_map(|&r| match col.value(r) {
                            Value::Num(x) => Some(x),
                            _ => None,
                        })
                        .collect();
                    levels.sort_by(f64::total_cmp);
                    levels.dedup();
                    let has_missing = rows.iter().any(|&r| col.value(r) == Value::Missing);
                    let offset = has_missing as u32;
                    let row_param = rows
                        .iter()
                        .map(|&r| match col.value(r) {
                            Value::Num(x) => offset + levels.partition_point(|&v| v < x) as u32,
                            _ => 0,
                        })
                        .collect();
                    let n_params = levels.len() + has_missing as usize;
                    blocks.push(Block {
                        feature: j,
                        row_param,
                        theta: vec![0.0; n_params.max(1)],
                        kind: BlockKind::Numeric { levels, has_missing },
                    });
                }
                (ColumnData::Categorical(_), FeatureBins::Categorical { categories, .. }) => {
                    for c in 0..categories.len() {
                        let row_param = rows.iter().map(|&r| (data.bins[j][r] as usize == c) as u32).collect();
                        blocks.push(Block {
                            feature: j,
                            row_param,
                            theta: vec![0.0; 2],
                            kind: BlockKind::Indicator { category: c },
                        });
                    }
                }
                _ => return Err(Error::Schema("feature kind does not match its binning".into())),
            }
        }
        let intercept = (rate / (1.0 - rate)).ln();
        let n = rows.len();
        Ok(Problem {
            data,
            rows,
            y,
            blocks,
            intercept,
            scores: vec![intercept; n],
        })
    }

    fn n(&self) -> f64 {
        self.rows.len() as f64
    }

    fn loss(&self, scores: &[f64]) -> f64 {
        scores.iter().zip(&self.y).map(|(&s, &y)| score_loss(s, y)).sum::<f64>() / self.n()
    }

    fn penalty(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.theta.windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>())
            .sum()
    }

    fn objective(&self, lambda: f64) -> f64 {
        self.loss(&self.scores) + lambda * self.penalty()
    }

    /// Per-parameter weights and weighted-mean working responses for block
    /// `k`, using row weights `w` (already divided by n).
    fn block_targets(&self, k: usize, w: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let block = &self.blocks[k];
        let m = block.theta.len();
        let mut wsum = vec![0.0; m];
        let mut zsum = vec![0.0; m];
        for ((&p, &wi), &zi) in block.row_param.iter().zip(w).zip(z) {
            wsum[p as usize] += wi;
            zsum[p as usize] += wi * zi;
        }
        let targets = zsum
            .iter()
            .zip(&wsum)
            .zip(&block.theta)
            .map(|((&zs, &ws), &t)| if ws > 0.0 { zs / ws } else { t })
            .collect();
        (wsum, targets)
    }

    /// Largest saturation penalty over blocks at the current fit.
    fn lambda_max(&self) -> f64 {
        (0..self.blocks.len())
            .map(|k| {
                let (w, z) = self.working(k, false);
                let (wsum, targets) = self.block_targets(k, &w, &z);
                saturation_lambda(&targets, &wsum)
            })
            .fold(0.0, f64::max)
    }

    /// Row weights (divided by n) and working responses for block `k`.
    /// `majorize` uses the global curvature bound 1/4.
    fn working(&self, k: usize, majorize: bool) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let block = &self.blocks[k];
        let mut w = Vec::with_capacity(self.rows.len());
        let mut z = Vec::with_capacity(self.rows.len());
        for ((&s, &y), &p) in self.scores.iter().zip(&self.y).zip(&block.row_param) {
            let prob = logistic(s);
            let h = if majorize {
                0.25
            } else {
                (prob * (1.0 - prob)).max(1e-10)
            };
            w.push(h / n);
            z.push(block.theta[p as usize] + (y - prob) / h);
        }
        (w, z)
    }

    fn set_block(&mut self, k: usize, theta: Vec<f64>) {
        let block = &mut self.blocks[k];
        for (s, &p) in self.scores.iter_mut().zip(&block.row_param) {
            *s += theta[p as usize] - block.theta[p as usize];
        }
        block.theta = theta;
    }

    /// Move the row-mean of block `k` into the intercept.
    fn center_block(&mut self, k: usize) {
        let block = &mut self.blocks[k];
        let mean = block.row_param.iter().map(|&p| block.theta[p as usize]).sum::<f64>() / block.row_param.len() as f64;
        block.theta.iter_mut().for_each(|t| *t -= mean);
        self.intercept += mean;
    }

    fn update_block(&mut self, k: usize, lambda: f64) {
        let before = self.objective(lambda);
        let old = self.blocks[k].theta.clone();
        for majorize in [false, true] {
            let (w, z) = self.working(k, majorize);
            let (wsum, targets) = self.block_targets(k, &w, &z);
            let candidate = prox_with_free_params(&targets, &wsum, lambda);
            self.set_block(k, candidate);
            if self.objective(lambda) <= before {
                self.center_block(k);
                return;
            }
            self.set_block(k, old.clone());
        }
    }

    /// Sweep blocks until the relative objective change drops below `tol`.
    /// Returns whether it converged within `max_sweeps`.
    fn solve(&mut self, lambda: f64, cfg: &FlamConfig) -> bool {
        let mut prev = self.objective(lambda);
        for _ in 0..cfg.max_sweeps {
            for k in 0..self.blocks.len() {
                self.update_block(k, lambda);
            }
            let obj = self.objective(lambda);
            if (prev - obj).abs() <= cfg.tolerance * prev.abs().max(1e-12) {
                return true;
            }
            prev = obj;
        }
        false
    }

    fn to_model(&self, seed: u64) -> AdditiveModel {
        let data = self.data;
        let mut features = Vec::with_capacity(data.n_features());
        for j in 0..data.n_features() {
            let fb = data.feature(j);
            let blocks: Vec<&Block> = self.blocks.iter().filter(|b| b.feature == j).collect();
            let shape = match &fb.bins {
                FeatureBins::Numeric { .. } => {
                    let block = blocks[0];
                    let BlockKind::Numeric { levels, has_missing } = &block.kind else {
                        unreachable!("numeric feature has a numeric block")
                    };
                    let offset = *has_missing as usize;
                    let values = &block.theta[offset..];
                    let knots = if levels.is_empty() {
                        vec![(0.0, 0.0)]
                    } else {
                        compress_runs(levels, values)
                    };
                    ShapeFunction::Curve {
                        knots,
                        missing: if *has_missing { block.theta[0] } else { 0.0 },
                    }
                }
                FeatureBins::Categorical { categories, .. } => {
                    let base: f64 = blocks.iter().map(|b| b.theta[0]).sum();
                    let mut values = vec![base; categories.len() + 1];
                    for b in &blocks {
                        if let BlockKind::Indicator { category } = b.kind {
                            values[category] += b.theta[1] - b.theta[0];
                        }
                    }
                    ShapeFunction::Binned {
                        layout: BinLayout::from_bins(&fb.bins),
                        values,
                    }
                }
            };
            features.push(FeatureShape {
                name: fb.name.clone(),
                shape,
            });
        }
        AdditiveModel {
            algorithm: "flam".into(),
            seed,
            intercept: self.intercept,
            features,
            config_digest: String::new(),
            binning_digest: data.spec.digest(),
        }
    }
}

/// TV prox on the weighted parameters. Parameters without rows (zero
/// weight) copy their nearest weighted neighbour on the chain.
fn prox_with_free_params(targets: &[f64], weights: &[f64], lambda: f64) -> Vec<f64> {
    let idx: Vec<usize> = (0..targets.len()).filter(|&i| weights[i] > 0.0).collect();
    if idx.len() == targets.len() {
        return tv_denoise_1d(targets, weights, lambda);
    }
    if idx.is_empty() {
        return targets.to_vec();
    }
    let y: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
    let w: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
    let fit = tv_denoise_1d(&y, &w, lambda);
    let mut out = vec![0.0; targets.len()];
    let mut k = 0;
    for (i, o) in out.iter_mut().enumerate() {
        while k + 1 < idx.len() && idx[k] < i {
            k += 1;
        }
        *o = fit[k];
    }
    out
}

/// Knots at the ends of each constant run of `values` over `levels`.
fn compress_runs(levels: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let mut knots: Vec<(f64, f64)> = Vec::new();
    let n = levels.len();
    for i in 0..n {
        let starts_run = i == 0 || values[i] != values[i - 1];
        let ends_run = i + 1 == n || values[i] != values[i + 1];
        if starts_run || ends_run {
            knots.push((levels[i], values[i]));
        }
    }
    knots
}

/// Fit the path on a held-out split of the training rows, select `lambda`
/// by held-out logistic loss, then refit on all training rows.
pub fn fit_flam_path(data: &BinnedDataset, cfg: &FlamConfig) -> Result<FlamFit> {
    cfg.validate()?;
    let train = &data.split.train;
    if train.is_empty() {
        return Err(Error::Training("no training rows".into()));
    }
    let parts = stratified_partition(
        train,
        data.labels(),
        cfg.seed,
        &[1.0 - cfg.validation_fraction, cfg.validation_fraction],
    )?;
    let (fit_rows, holdout) = (parts[0].clone(), parts[1].clone());

    let mut sub = Problem::new(data, fit_rows)?;
    let lambdas = cfg.path(sub.lambda_max());
    let mut holdout_loss = Vec::with_capacity(lambdas.len());
    let mut converged = true;
    let labels = data.labels();
    for &lambda in &lambdas {
        converged &= sub.solve(lambda, cfg);
        let model = sub.to_model(cfg.seed);
        let scores = model.scores(&data.raw, &holdout)?;
        let loss = scores
            .iter()
            .zip(&holdout)
            .map(|(&s, &r)| score_loss(s, labels[r]))
            .sum::<f64>()
            / holdout.len() as f64;
        holdout_loss.push(loss);
    }
    let selected = holdout_loss
        .iter()
        .enumerate()
        .fold(0, |best, (i, &l)| if l < holdout_loss[best] { i } else { best });

    let mut full = Problem::new(data, train.clone())?;
    for &lambda in &lambdas[..=selected] {
        converged &= full.solve(lambda, cfg);
    }
    let model = full.to_model(cfg.seed).center(&data.raw, train)?;
    Ok(FlamFit {
        model,
        lambdas,
        holdout_loss,
        selected,
        converged,
    })
}

pub fn fit_flam(data: &BinnedDataset, cfg: &FlamConfig) -> Result<AdditiveModel> {
    fit_flam_path(data, cfg).map(|f| f.model)
}

/// Fit at a single fixed `lambda` on all training rows, warm-starting from
/// zero. Returns the model and the objective after every sweep.
pub fn fit_flam_fixed(data: &BinnedDataset, lambda: f64, cfg: &FlamConfig) -> Result<(AdditiveModel, Vec<f64>)> {
    let mut problem = Problem::new(data, data.split.train.clone())?;
    let mut trace = vec![problem.objective(lambda)];
    for _ in 0..cfg.max_sweeps {
        for k in 0..problem.blocks.len() {
            problem.update_block(k, lambda);
        }
        let obj = problem.objective(lambda);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if (prev - obj).abs() <= cfg.tolerance * prev.abs().max(1e-12) {
            break;
        }
    }
    Ok((problem.to_model(cfg.seed), trace))
}

/// `lambda_max` of the null model on all training rows.
pub fn flam_lambda_max(data: &BinnedDataset) -> Result<f64> {
    Ok(Problem::new(data, data.split.train.clone())?.lambda_max())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_is_log_spaced_and_decreasing() {
        let cfg = FlamConfig::default();
        let p = cfg.path(2.0);
        assert_eq!(p.len(), 100);
        assert_eq!(p[0], 2.0);
        assert!((p[99] - 2e-4).abs() < 1e-15);
        assert!(p.windows(2).all(|w| w[0] > w[1]));
        let r0 = p[1] / p[0];
        assert!(p.windows(2).all(|w| ((w[1] / w[0]) - r0).abs() < 1e-12));
    }

    #[test]
    fn runs_compress_to_end_knots() {
        let knots = compress_runs(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(knots, vec![(1.0, 0.0), (3.0, 0.0), (4.0, 1.0)]);
    }

    #[test]
    fn free_parameters_copy_neighbour() {
        let out = prox_with_free_params(&[5.0, 1.0, 9.0], &[0.0, 1.0, 1.0], 0.0);
        assert_eq!(out, vec![1.0, 1.0, 9.0]);
    }
}
