//! Penalized logistic regression in four flavors: plain (LR / LASSO), one
//! indicator per bin (iLR), and per-bin target-rate encoding (mLR).
//!
//! Objective: `(1/n) sum_i logloss_i + lambda * P(beta)` with
//! `lambda = 1 / (C n)`, `P = ||beta||^2 / 2` (L2) or `||beta||_1` (L1), and an
//! unpenalized intercept. Solved by proximal Newton with coordinate descent
//! on each quadratic model and a backtracking line search.

use serde::{Deserialize, Serialize};

use crate::boost::score_loss;
use crate::data::{stratified_partition, BinnedDataset, ColumnData, FeatureBins, Value};
use crate::error::{Error, Result};
use crate::model::{logistic, AdditiveModel, BinLayout, FeatureShape, ShapeFunction};
use crate::smooth::spline::log_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearVariant {
    /// Standardized numeric columns, one-hot categoricals.
    Plain,
    /// One indicator column per bin.
    IndicatorBins,
    /// Each feature replaced by the standardized smoothed positive rate of
    /// its bin.
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearConfig {
    pub penalty: Penalty,
    /// Inverse regularization strengths to cross-validate.
    pub cs: Vec<f64>,
    pub folds: usize,
    pub max_iter: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            penalty: Penalty::L2,
            cs: log_grid(1e-4, 1e4, 12),
            folds: 5,
            max_iter: 100,
            tolerance: 1e-9,
            seed: 0,
        }
    }
}

impl LinearConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cs.is_empty() || self.cs.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Config("Cs must be non-empty and positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("need at least 2 CV folds".into()));
        }
        Ok(())
    }
}

/// Column-major sparse design over a fixed list of rows (local indices).
#[derive(Debug, Clone, Default)]
pub struct SparseDesign {
    pub n_rows: usize,
    pub cols: Vec<(Vec<u32>, Vec<f64>)>,
}

impl SparseDesign {
    fn push(&mut self, entries: Vec<(u32, f64)>) -> usize {
        let (rows, vals) = entries.into_iter().filter(|e| e.1 != 0.0).unzip();
        self.cols.push((rows, vals));
        self.cols.len() - 1
    }

    fn eta(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.n_rows];
        for ((rows, vals), &b) in self.cols.iter().zip(beta) {
            if b != 0.0 {
                for (&r, &v) in rows.iter().zip(vals) {
                    eta[r as usize] += v * b;
                }
            }
        }
        eta
    }
}

fn penalty_value(penalty: Penalty, lambda: f64, beta: &[f64]) -> f64 {
    match penalty {
        Penalty::L2 => 0.5 * lambda * beta.iter().map(|b| b * b).sum::<f64>(),
        Penalty::L1 => lambda * beta.iter().map(|b| b.abs()).sum::<f64>(),
    }
}

/// Weighted objective `(1/sum v) sum v_i logloss_i + lambda P(beta)`.
pub fn logistic_objective(
    design: &SparseDesign,
    y: &[f64],
    v: &[f64],
    penalty: Penalty,
    lambda: f64,
    b0: f64,
    beta: &[f64],
) -> f64 {
    let eta = design.eta(b0, beta);
    let nv: f64 = v.iter().sum();
    let loss: f64 = eta
        .iter()
        .zip(y)
        .zip(v)
        .filter(|(_, &vi)| vi > 0.0)
        .map(|((&s, &t), &vi)| vi * score_loss(s, t))
        .sum();
    loss / nv + penalty_value(penalty, lambda, beta)
}

/// Minimize the weighted objective in place. Returns whether the relative
/// objective change fell under `tol` within `max_iter` Newton steps.
#[allow(clippy::too_many_arguments)]
pub fn solve_logistic(
    design: &SparseDesign,
    y: &[f64],
    v: &[f64],
    penalty: Penalty,
    lambda: f64,
    b0: &mut f64,
    beta: &mut [f64],
    max_iter: usize,
    tol: f64,
) -> bool {
    let n = design.n_rows;
    let nv: f64 = v.iter().sum();
    let objective = |b0: f64, beta: &[f64]| logistic_objective(design, y, v, penalty, lambda, b0, beta);
    let mut obj = objective(*b0, beta);
    for _ in 0..max_iter {
        let eta = design.eta(*b0, beta);
        let mut w = vec![0.0; n];
        let mut resid = vec![0.0; n];
        for i in 0..n {
            let p = logistic(eta[i]);
            let h = (p * (1.0 - p)).max(1e-6);
            w[i] = v[i] * h / nv;
            resid[i] = (y[i] - p) / h;
        }
        let col_w: Vec<f64> = design
            .cols
            .iter()
            .map(|(rows, vals)| rows.iter().zip(vals).map(|(&r, &x)| w[r as usize] * x * x).sum())
            .collect();
        let sum_w: f64 = w.iter().sum();

        let mut nb0 = *b0;
        let mut nbeta = beta.to_vec();
        for _ in 0..200 {
            let mut max_delta = 0.0f64;
            let d0 = w.iter().zip(&resid).map(|(a, b)| a * b).sum::<f64>() / sum_w;
            nb0 += d0;
            resid.iter_mut().for_each(|r| *r -= d0);
            max_delta = max_delta.max(d0.abs());
            for (k, (rows, vals)) in design.cols.iter().enumerate() {
                let xw2 = col_w[k];
                if xw2 <= 0.0 {
                    continue;
                }
                let grad: f64 = rows
                    .iter()
                    .zip(vals)
                    .map(|(&r, &x)| w[r as usize] * x * resid[r as usize])
                    .sum::<f64>()
                    + xw2 * nbeta[k];
                let updated = match penalty {
                    Penalty::L2 => grad / (xw2 + lambda),
                    Penalty::L1 => grad.signum() * (grad.abs() - lambda).max(0.0) / xw2,
                };
                let d = updated - nbeta[k];
                if d != 0.0 {
                    for (&r, &x) in rows.iter().zip(vals) {
                        resid[r as usize] -= x * d;
                    }
                    nbeta[k] = updated;
                    max_delta = max_delta.max(d.abs() * xw2.sqrt());
                }
            }
            if max_delta < 1e-10 {
                break;
            }
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cb0 = *b0 + step * (nb0 - *b0);
            let cbeta: Vec<f64> = beta.iter().zip(&nbeta).map(|(&o, &n)| o + step * (n - o)).collect();
            let cobj = objective(cb0, &cbeta);
            if cobj <= obj {
                let change = obj - cobj;
                *b0 = cb0;
                beta.copy_from_slice(&cbeta);
                obj = cobj;
                accepted = true;
                if change <= tol * obj.abs().max(1e-12) {
                    return true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return true;
        }
    }
    false
}

#[derive(Debug, Clone)]
enum Term {
    Numeric {
        feature: usize,
        col: Option<usize>,
        mean: f64,
        sd: f64,
        range: (f64, f64),
        missing_col: Option<usize>,
    },
    Categorical {
        feature: usize,
        /// Column per category (`None` when absent from training rows).
        cols: Vec<Option<usize>>,
    },
    Bins {
        feature: usize,
        cols: Vec<Option<usize>>,
    },
    Marginal {
        feature: usize,
        col: Option<usize>,
        /// Standardized encoding per bin.
        encoded: Vec<f64>,
    },
}

struct Problem {
    design: SparseDesign,
    terms: Vec<Term>,
    y: Vec<f64>,
}

fn build(data: &BinnedDataset, rows: &[usize], variant: LinearVariant) -> Problem {
    let labels = data.labels();
    let y: Vec<f64> = rows.iter().map(|&r| labels[r]).collect();
    let mut design = SparseDesign {
        n_rows: rows.len(),
        cols: Vec::new(),
    };
    let mut terms = Vec::new();
    for j in 0..data.n_features() {
        let f = data.feature(j);
        let bins = &data.bins[j];
        match variant {
            LinearVariant::Plain => match (&data.column(j).data, &f.bins) {
                (ColumnData::Numeric(_), _) => {
                    let vals: Vec<(u32, f64)> = rows
                        .iter()
                        .enumerate()
                        .filter_map(|(i, &r)| match data.value(j, r) {
                            Value::Num(x) => Some((i as u32, x)),
                            _ => None,
                        })
                        .collect();
                    let m = vals.len().max(1) as f64;
                    let mean = vals.iter().map(|v| v.1).sum::<f64>() / m;
                    let var = vals.iter().map(|v| (v.1 - mean).powi(2)).sum::<f64>() / m;
                    let sd = var.sqrt();
                    let lo = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
                    let col =
                        (sd > 0.0).then(|| design.push(vals.iter().map(|&(i, x)| (i, (x - mean) / sd)).collect()));
                    let missing: Vec<(u32, f64)> = rows
                        .iter()
                        .enumerate()
                        .filter(|(_, &r)| data.value(j, r) == Value::Missing)
                        .map(|(i, _)| (i as u32, 1.0))
                        .collect();
                    let missing_col = (!missing.is_empty()).then(|| design.push(missing));
                    terms.push(Term::Numeric {
                        feature: j,
                        col,
                        mean,
                        sd,
                        range: if vals.is_empty() { (0.0, 0.0) } else { (lo, hi) },
                        missing_col,
                    });
                }
                (ColumnData::Categorical(_), FeatureBins::Categorical { categories, .. }) => {
                    let cols = indicator_columns(&mut design, rows, bins, categories.len());
                    terms.push(Term::Categorical { feature: j, cols });
                }
                _ => unreachable!("encode checks kinds"),
            },
            LinearVariant::IndicatorBins => {
                let cols = indicator_columns(&mut design, rows, bins, f.n_bins());
                terms.push(Term::Bins { feature: j, cols });
            }
            LinearVariant::Marginal => {
                let n_bins = f.n_bins();
                let mut pos = vec![0.0; n_bins];
                let mut cnt = vec![0.0; n_bins];
                for (i, &r) in rows.iter().enumerate() {
                    let b = bins[r] as usize;
                    pos[b] += y[i];
                    cnt[b] += 1.0;
                }
                let rate: Vec<f64> = (0..n_bins).map(|b| (pos[b] + 1.0) / (cnt[b] + 2.0)).collect();
                let n = rows.len().max(1) as f64;
                let mean = rows.iter().map(|&r| rate[bins[r] as usize]).sum::<f64>() / n;
                let var = rows
                    .iter()
                    .map(|&r| (rate[bins[r] as usize] - mean).powi(2))
                    .sum::<f64>()
                    / n;
                let sd = var.sqrt();
                let encoded: Vec<f64> = if sd > 0.0 {
                    rate.iter().map(|g| (g - mean) / sd).collect()
                } else {
                    vec![0.0; n_bins]
                };
                let col = (sd > 0.0).then(|| {
                    design.push(
                        rows.iter()
                            .enumerate()
                            .map(|(i, &r)| (i as u32, encoded[bins[r] as usize]))
                            .collect(),
                    )
                });
                terms.push(Term::Marginal {
                    feature: j,
                    col,
                    encoded,
                });
            }
        }
    }
    Problem { design, terms, y }
}

fn indicator_columns(design: &mut SparseDesign, rows: &[usize], bins: &[u16], n: usize) -> Vec<Option<usize>> {
    let mut members: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (i, &r) in rows.iter().enumerate() {
        if let Some(m) = members.get_mut(bins[r] as usize) {
            m.push((i as u32, 1.0));
        }
    }
    members
        .into_iter()
        .map(|m| (!m.is_empty()).then(|| design.push(m)))
        .collect()
}

impl Problem {
    fn to_model(&self, data: &BinnedDataset, b0: f64, beta: &[f64], name: &str) -> AdditiveModel {
        let coef = |c: &Option<usize>| c.map(|c| beta[c]).unwrap_or(0.0);
        let features = self
            .terms
            .iter()
            .map(|term| {
                let (feature, shape) = match term {
                    Term::Numeric {
                        feature,
                        col,
                        mean,
                        sd,
                        range,
                        missing_col,
                    } => {
                        let slope = if *sd > 0.0 { coef(col) / sd } else { 0.0 };
                        let f = |x: f64| slope * (x - mean);
                        let knots = if range.0 < range.1 {
                            vec![(range.0, f(range.0)), (range.1, f(range.1))]
                        } else {
                            vec![(range.0, 0.0)]
                        };
                        (
                            *feature,
                            ShapeFunction::Curve {
                                knots,
                                missing: coef(missing_col),
                            },
                        )
                    }
                    Term::Categorical { feature, cols } => {
                        let mut values: Vec<f64> = cols.iter().map(coef).collect();
                        values.push(0.0);
                        (*feature, self.binned(data, *feature, values))
                    }
                    Term::Bins { feature, cols } => {
                        let values = cols.iter().map(coef).collect();
                        (*feature, self.binned(data, *feature, values))
                    }
                    Term::Marginal { feature, col, encoded } => {
                        let w = coef(col);
                        let values = encoded.iter().map(|e| w * e).collect();
                        (*feature, self.binned(data, *feature, values))
                    }
                };
                FeatureShape {
                    name: data.feature(feature).name.clone(),
                    shape,
                }
            })
            .collect();
        AdditiveModel {
            algorithm: name.into(),
            seed: 0,
            intercept: b0,
            features,
            config_digest: String::new(),
            binning_digest: data.spec.digest(),
        }
    }

    fn binned(&self, data: &BinnedDataset, feature: usize, values: Vec<f64>) -> ShapeFunction {
        ShapeFunction::Binned {
            layout: BinLayout::from_bins(&data.feature(feature).bins),
            values,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub model: AdditiveModel,
    pub cs: Vec<f64>,
    /// Mean held-out log loss per C.
    pub cv_loss: Vec<f64>,
    pub selected: usize,
}

/// Choose C by stratified k-fold log loss on the training rows, then refit
/// on all of them.
pub fn fit_linear_cv(data: &BinnedDataset, variant: LinearVariant, cfg: &LinearConfig) -> Result<LinearFit> {
    cfg.validate()?;
    let rows = &data.split.train;
    let problem = build(data, rows, variant);
    let y = &problem.y;
    let rate = y.iter().sum::<f64>() / y.len().max(1) as f64;
    if rate <= 0.0 || rate >= 1.0 {
        return Err(Error::Training("training labels contain a single class".into()));
    }
    let local: Vec<usize> = (0..rows.len()).collect();
    let fractions = vec![1.0 / cfg.folds as f64; cfg.folds];
    let folds = stratified_partition(&local, y, cfg.seed, &fractions)?;
    let p = problem.design.cols.len();
    let init_b0 = (rate / (1.0 - rate)).ln();

    // Strong to weak penalty so each fit warm-starts from a sparser one.
    let mut order: Vec<usize> = (0..cfg.cs.len()).collect();
    order.sort_by(|&a, &b| cfg.cs[a].total_cmp(&cfg.cs[b]));
    let mut cv_loss = vec![0.0; cfg.cs.len()];
    for fold in &folds {
        let mut v = vec![1.0; rows.len()];
        for &i in fold {
            v[i] = 0.0;
        }
        let n_fit: f64 = v.iter().sum();
        let mut b0 = init_b0;
        let mut beta = vec![0.0; p];
        for &ci in &order {
            let lambda = 1.0 / (cfg.cs[ci] * n_fit);
            solve_logistic(
                &problem.design,
                y,
                &v,
                cfg.penalty,
                lambda,
                &mut b0,
                &mut beta,
                cfg.max_iter,
                cfg.tolerance,
            );
            let eta = problem.design.eta(b0, &beta);
            let loss: f64 = fold.iter().map(|&i| score_loss(eta[i], y[i])).sum::<f64>() / fold.len() as f64;
            cv_loss[ci] += loss / folds.len() as f64;
        }
    }
    let selected = (0..cfg.cs.len()).fold(0, |best, i| if cv_loss[i] < cv_loss[best] { i } else { best });

    let v = vec![1.0; rows.len()];
    let mut b0 = init_b0;
    let mut beta = vec![0.0; p];
    for &ci in order.iter().take_while(|&&ci| ci != selected).chain([&selected]) {
        let lambda = 1.0 / (cfg.cs[ci] * rows.len() as f64);
        solve_logistic(
            &problem.design,
            y,
            &v,
            cfg.penalty,
            lambda,
            &mut b0,
            &mut beta,
            cfg.max_iter,
            cfg.tolerance,
        );
    }
    let name = match (variant, cfg.penalty) {
        (LinearVariant::Plain, Penalty::L2) => "lr",
        (LinearVariant::Plain, Penalty::L1) => "lasso",
        (LinearVariant::IndicatorBins, _) => "ilr",
        (LinearVariant::Marginal, _) => "mlr",
    };
    let model = problem.to_model(data, b0, &beta, name).center(&data.raw, rows)?;
    Ok(LinearFit {
        model,
        cs: cfg.cs.clone(),
        cv_loss,
        selected,
    })
}

/// Fit at one fixed C on all training rows, without cross-validation.
pub fn fit_linear_fixed(
    data: &BinnedDataset,
    variant: LinearVariant,
    penalty: Penalty,
    c: f64,
) -> Result<AdditiveModel> {
    let rows = &data.split.train;
    let problem = build(data, rows, variant);
    let v = vec![1.0; rows.len()];
    let rate = problem.y.iter().sum::<f64>() / rows.len().max(1) as f64;
    let mut b0 = (rate.clamp(1e-6, 1.0 - 1e-6) / (1.0 - rate.clamp(1e-6, 1.0 - 1e-6))).ln();
    let mut beta = vec![0.0; problem.design.cols.len()];
    solve_logistic(
        &problem.design,
        &problem.y,
        &v,
        penalty,
        1.0 / (c * rows.len() as f64),
        &mut b0,
        &mut beta,
        200,
        1e-12,
    );
    problem.to_model(data, b0, &beta, "lr").center(&data.raw, rows)
}
