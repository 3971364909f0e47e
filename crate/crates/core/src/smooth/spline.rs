//! Penalized cubic B-spline GAM fit by penalized IRLS, with one shared
//! smoothness multiplier chosen by generalized cross-validation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::boost::score_loss;
use crate::data::{BinnedDataset, ColumnData, FeatureBins, Value};
use crate::error::{Error, Result};
use crate::model::{logistic, AdditiveModel, BinLayout, FeatureShape, ShapeFunction};

pub const DEGREE: usize = 3;
/// Points at which fitted curves are tabulated for export.
pub const EXPORT_GRID: usize = 256;

/// Clamped cubic B-spline basis on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    /// Full knot vector: `lo` repeated 4 times, interior knots, `hi` 4 times.
    pub knots: Vec<f64>,
}

impl SplineBasis {
    /// Basis with at most `max_basis` functions and interior knots at
    /// training-data quantiles. `None` when the data has fewer than 4
    /// distinct values or `max_basis < 4`.
    pub fn from_sorted(values: &[f64], max_basis: usize) -> Option<Self> {
        let n = values.len();
        let mut uniq = values.to_vec();
        uniq.dedup();
        let k = max_basis.min(uniq.len());
        if k < DEGREE + 1 {
            return None;
        }
        let (lo, hi) = (values[0], values[n - 1]);
        let n_interior = k - (DEGREE + 1);
        let mut interior: Vec<f64> = (1..=n_interior)
            .map(|q| {
                let pos = q as f64 / (n_interior + 1) as f64 * (n - 1) as f64;
                let i = pos.floor() as usize;
                let frac = pos - i as f64;
                if i + 1 < n {
                    values[i] + frac * (values[i + 1] - values[i])
                } else {
                    values[n - 1]
                }
            })
            .filter(|&t| t > lo && t < hi)
            .collect();
        interior.dedup();
        let mut knots = vec![lo; DEGREE + 1];
        knots.extend(interior);
        knots.extend(std::iter::repeat_n(hi, DEGREE + 1));
        Some(SplineBasis { knots })
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - (DEGREE + 1)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Index of the first non-zero basis function at `x` and the four
    /// non-zero values. `x` is clamped into range.
    pub fn eval_nonzero(&self, x: f64) -> (usize, [f64; DEGREE + 1]) {
        let (lo, hi) = self.range();
        let x = x.clamp(lo, hi);
        let t = &self.knots;
        let last = self.n_basis() - 1;
        // Span i with t[i] <= x < t[i+1], restricted to [DEGREE, last].
        let span = if x >= hi {
            last
        } else {
            (t.partition_point(|&k| k <= x) - 1).clamp(DEGREE, last)
        };
        let mut basis = [0.0; DEGREE + 1];
        let mut left = [0.0; DEGREE + 1];
        let mut right = [0.0; DEGREE + 1];
        basis[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = basis[r] / (right[r + 1] + left[j - r]);
                basis[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            basis[j] = saved;
        }
        (span - DEGREE, basis)
    }

    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_basis()];
        let (first, vals) = self.eval_nonzero(x);
        out[first..first + DEGREE + 1].copy_from_slice(&vals);
        out
    }

    /// Second-difference penalty `D2' D2` over the coefficients.
    pub fn penalty(&self) -> DMatrix<f64> {
        let k = self.n_basis();
        let mut d = DMatrix::zeros(k.saturating_sub(2), k);
        for i in 0..k.saturating_sub(2) {
            d[(i, i)] = 1.0;
            d[(i, i + 1)] = -2.0;
            d[(i, i + 2)] = 1.0;
        }
        d.transpose() * d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplineConfig {
    pub max_basis: usize,
    /// Smoothness multipliers, relative to each feature's scaled penalty.
    pub lambda_grid: Vec<f64>,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for SplineConfig {
    fn default() -> Self {
        SplineConfig {
            max_basis: 50,
            lambda_grid: log_grid(1e-3, 1e4, 15),
            max_iter: 100,
            tolerance: 1e-8,
        }
    }
}

impl SplineConfig {
    pub fn desk() -> Self {
        SplineConfig {
            lambda_grid: log_grid(1e-3, 1e4, 10),
            ..Default::default()
        }
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone)]
enum Term {
    Spline {
        feature: usize,
        basis: SplineBasis,
        start: usize,
        missing_col: Option<usize>,
    },
    Linear {
        feature: usize,
        col: usize,
        center: f64,
        range: (f64, f64),
        missing_col: Option<usize>,
    },
    Constant {
        feature: usize,
        at: f64,
        missing_col: Option<usize>,
    },
    Categorical {
        feature: usize,
        /// Column for categories `1..`; category 0 is the baseline.
        start: usize,
        n_categories: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SplineFit {
    pub model: AdditiveModel,
    pub lambdas: Vec<f64>,
    /// `None` where IRLS diverged and the point was skipped.
    pub gcv: Vec<Option<f64>>,
    pub edf: Vec<Option<f64>>,
    pub selected: usize,
}

struct Design {
    rows: Vec<Vec<(usize, f64)>>,
    n_cols: usize,
    terms: Vec<Term>,
    /// Scaled penalty blocks `(start, matrix)`.
    penalties: Vec<(usize, DMatrix<f64>)>,
}

fn build_design(data: &BinnedDataset, rows: &[usize], max_basis: usize) -> Design {
    let mut n_cols = 1;
    let mut terms = Vec::new();
    for j in 0..data.n_features() {
        let col = data.column(j);
        let has_missing = rows.iter().any(|&r| col.value(r) == Value::Missing);
        match (&col.data, &data.feature(j).bins) {
            (ColumnData::Numeric(_), _) => {
                let mut vals: Vec<f64> = rows
                    .iter()
                    .filter_map(|&r| match col.value(r) {
                        Value::Num(x) => Some(x),
                        _ => None,
                    })
                    .collect();
                vals.sort_by(f64::total_cmp);
                let take_missing = |n_cols: &mut usize| {
                    has_missing.then(|| {
                        *n_cols += 1;
                        *n_cols - 1
                    })
                };
                let distinct = {
                    let mut u = vals.clone();
                    u.dedup();
                    u.len()
                };
                if let Some(basis) = SplineBasis::from_sorted(&vals, max_basis) {
                    let start = n_cols;
                    n_cols += basis.n_basis();
                    let missing_col = take_missing(&mut n_cols);
                    terms.push(Term::Spline {
                        feature: j,
                        basis,
                        start,
                        missing_col,
                    });
                } else if distinct >= 2 {
                    let center = vals.iter().sum::<f64>() / vals.len() as f64;
                    let col_idx = n_cols;
                    n_cols += 1;
                    let missing_col = take_missing(&mut n_cols);
                    terms.push(Term::Linear {
                        feature: j,
                        col: col_idx,
                        center,
                        range: (vals[0], vals[vals.len() - 1]),
                        missing_col,
                    });
                } else {
                    let missing_col = take_missing(&mut n_cols);
                    terms.push(Term::Constant {
                        feature: j,
                        at: vals.first().copied().unwrap_or(0.0),
                        missing_col,
                    });
                }
            }
            (ColumnData::Categorical(_), FeatureBins::Categorical { categories, .. }) => {
                let start = n_cols;
                n_cols += categories.len().saturating_sub(1);
                terms.push(Term::Categorical {
                    feature: j,
                    start,
                    n_categories: categories.len(),
                });
            }
            _ => unreachable!("encode checks kinds"),
        }
    }

    let design_rows: Vec<Vec<(usize, f64)>> = rows
        .iter()
        .map(|&r| {
            let mut entries = vec![(0, 1.0)];
            for term in &terms {
                match term {
                    Term::Spline {
                        feature,
                        basis,
                        start,
                        missing_col,
                    } => match data.value(*feature, r) {
                        Value::Num(x) => {
                            let (first, vals) = basis.eval_nonzero(x);
                            for (k, v) in vals.iter().enumerate() {
                                if *v != 0.0 {
                                    entries.push((start + first + k, *v));
                                }
                            }
                        }
                        _ => entries.extend(missing_col.map(|c| (c, 1.0))),
                    },
                    Term::Linear {
                        feature,
                        col,
                        center,
                        missing_col,
                        ..
                    } => match data.value(*feature, r) {
                        Value::Num(x) => entries.push((*col, x - center)),
                        _ => entries.extend(missing_col.map(|c| (c, 1.0))),
                    },
                    Term::Constant {
                        feature, missing_col, ..
                    } => {
                        if data.value(*feature, r) == Value::Missing {
                            entries.extend(missing_col.map(|c| (c, 1.0)));
                        }
                    }
                    Term::Categorical { feature, start, .. } => {
                        let b = data.bins[*feature][r] as usize;
                        let FeatureBins::Categorical { categories, .. } = &data.feature(*feature).bins else {
                            unreachable!()
                        };
                        if b >= 1 && b < categories.len() {
                            entries.push((start + b - 1, 1.0));
                        }
                    }
                }
            }
            entries
        })
        .collect();

    Design {
        rows: design_rows,
        n_cols,
        terms,
        penalties: Vec::new(),
    }
}

impl Design {
    fn gram(&self, w: &[f64]) -> DMatrix<f64> {
        let p = self.n_cols;
        let mut g = DMatrix::zeros(p, p);
        for (row, &wi) in self.rows.iter().zip(w) {
            for (ia, &(a, va)) in row.iter().enumerate() {
                let wa = wi * va;
                for &(b, vb) in &row[ia..] {
                    g[(a.min(b), a.max(b))] += wa * vb;
                }
            }
        }
        g.fill_lower_triangle_with_upper_triangle();
        g
    }

    fn eta(&self, beta: &DVector<f64>) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * beta[c]).sum())
            .collect()
    }

    /// Per-feature penalties scaled so each block's Frobenius norm matches
    /// that of its Gram block under the null-model weights.
    fn scale_penalties(&mut self, w0: f64) {
        let gram = self.gram(&vec![w0; self.rows.len()]);
        for term in &self.terms {
            if let Term::Spline { basis, start, .. } = term {
                let s = basis.penalty();
                let k = basis.n_basis();
                let block = gram.view((*start, *start), (k, k));
                let scale = block.norm() / s.norm().max(1e-300);
                self.penalties.push((*start, s * scale));
            }
        }
    }

    fn penalty_matrix(&self, lambda: f64, ridge: f64) -> DMatrix<f64> {
        let p = self.n_cols;
        let mut m = DMatrix::zeros(p, p);
        for (start, s) in &self.penalties {
            let k = s.nrows();
            let mut view = m.view_mut((*start, *start), (k, k));
            view += s * lambda;
        }
        for i in 1..p {
            m[(i, i)] += ridge;
        }
        m
    }
}

struct IrlsResult {
    beta: DVector<f64>,
    deviance: f64,
    edf: f64,
}

fn irls(
    design: &Design,
    y: &[f64],
    penalty: &DMatrix<f64>,
    start: &DVector<f64>,
    cfg: &SplineConfig,
) -> Option<IrlsResult> {
    let objective = |beta: &DVector<f64>| -> f64 {
        let eta = design.eta(beta);
        let loss: f64 = eta.iter().zip(y).map(|(&s, &t)| score_loss(s, t)).sum();
        loss + 0.5 * (beta.transpose() * penalty * beta)[(0, 0)]
    };
    let weights = |beta: &DVector<f64>| -> (Vec<f64>, Vec<f64>) {
        let eta = design.eta(beta);
        let mut w = Vec::with_capacity(y.len());
        let mut z = Vec::with_capacity(y.len());
        for (&e, &t) in eta.iter().zip(y) {
            let p = logistic(e);
            let wi = (p * (1.0 - p)).max(1e-8);
            w.push(wi);
            z.push(e + (t - p) / wi);
        }
        (w, z)
    };

    let mut beta = start.clone();
    let mut obj = objective(&beta);
    if !obj.is_finite() {
        return None;
    }
    for _ in 0..cfg.max_iter {
        let (w, z) = weights(&beta);
        let a = design.gram(&w) + penalty;
        let mut rhs = DVector::zeros(design.n_cols);
        for ((row, &wi), &zi) in design.rows.iter().zip(&w).zip(&z) {
            for &(c, v) in row {
                rhs[c] += wi * v * zi;
            }
        }
        let target = a.cholesky()?.solve(&rhs);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = &beta + (&target - &beta) * step;
            let o = objective(&cand);
            if o.is_finite() && o <= obj + 1e-12 * obj.abs() {
                accepted = Some((cand, o));
                break;
            }
            step *= 0.5;
        }
        let Some((next, next_obj)) = accepted else {
            break;
        };
        let change = (obj - next_obj).abs();
        beta = next;
        obj = next_obj;
        if change <= cfg.tolerance * (obj.abs() + 0.1) {
            break;
        }
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return None;
    }
    let (w, _) = weights(&beta);
    let gram = design.gram(&w);
    let chol = (&gram + penalty).cholesky()?;
    let edf = chol.solve(&gram).trace();
    let eta = design.eta(&beta);
    let deviance = 2.0 * eta.iter().zip(y).map(|(&s, &t)| score_loss(s, t)).sum::<f64>();
    Some(IrlsResult { beta, deviance, edf })
}

/// `n * D / (n - edf)^2`.
pub fn gcv_score(n: usize, deviance: f64, edf: f64) -> f64 {
    let n = n as f64;
    n * deviance / ((n - edf) * (n - edf))
}

pub fn fit_spline_path(data: &BinnedDataset, cfg: &SplineConfig) -> Result<SplineFit> {
    if cfg.lambda_grid.is_empty() || cfg.lambda_grid.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Config(
            "spline lambda grid must be non-empty and positive".into(),
        ));
    }
    let rows = &data.split.train;
    let labels = data.labels();
    let y: Vec<f64> = rows.iter().map(|&r| labels[r]).collect();
    let rate = y.iter().sum::<f64>() / y.len().max(1) as f64;
    if rate <= 0.0 || rate >= 1.0 {
        return Err(Error::Training("training labels contain a single class".into()));
    }
    let mut design = build_design(data, rows, cfg.max_basis);
    let w0 = rate * (1.0 - rate);
    design.scale_penalties(w0);
    let ridge = {
        let g = design.gram(&vec![w0; rows.len()]);
        1e-8 * g.trace() / design.n_cols as f64
    };

    let mut start = DVector::zeros(design.n_cols);
    start[0] = (rate / (1.0 - rate)).ln();
    // Heavy to light penalty, warm-started.
    let mut order: Vec<usize> = (0..cfg.lambda_grid.len()).collect();
    order.sort_by(|&a, &b| cfg.lambda_grid[b].total_cmp(&cfg.lambda_grid[a]));
    let mut gcv = vec![None; cfg.lambda_grid.len()];
    let mut edf = vec![None; cfg.lambda_grid.len()];
    let mut betas: Vec<Option<DVector<f64>>> = vec![None; cfg.lambda_grid.len()];
    for &i in &order {
        let penalty = design.penalty_matrix(cfg.lambda_grid[i], ridge);
        if let Some(res) = irls(&design, &y, &penalty, &start, cfg) {
            gcv[i] = Some(gcv_score(rows.len(), res.deviance, res.edf));
            edf[i] = Some(res.edf);
            start = res.beta.clone();
            betas[i] = Some(res.beta);
        }
    }
    let selected = (0..gcv.len())
        .filter(|&i| gcv[i].is_some())
        .min_by(|&a, &b| gcv[a].unwrap().total_cmp(&gcv[b].unwrap()))
        .ok_or_else(|| Error::Training("IRLS diverged for every lambda".into()))?;
    let beta = betas[selected].as_ref().expect("selected fit exists");
    let model = to_model(data, &design, beta).center(&data.raw, rows)?;
    Ok(SplineFit {
        model,
        lambdas: cfg.lambda_grid.clone(),
        gcv,
        edf,
        selected,
    })
}

pub fn fit_spline(data: &BinnedDataset, cfg: &SplineConfig) -> Result<AdditiveModel> {
    fit_spline_path(data, cfg).map(|f| f.model)
}

fn to_model(data: &BinnedDataset, design: &Design, beta: &DVector<f64>) -> AdditiveModel {
    let missing_of = |c: &Option<usize>| c.map(|c| beta[c]).unwrap_or(0.0);
    let features = design
        .terms
        .iter()
        .map(|term| {
            let (feature, shape) = match term {
                Term::Spline {
                    feature,
                    basis,
                    start,
                    missing_col,
                } => {
                    let (lo, hi) = basis.range();
                    let knots = (0..EXPORT_GRID)
                        .map(|g| {
                            let x = lo + (hi - lo) * g as f64 / (EXPORT_GRID - 1) as f64;
                            let (first, vals) = basis.eval_nonzero(x);
                            let fx: f64 = vals.iter().enumerate().map(|(k, v)| v * beta[start + first + k]).sum();
                            (x, fx)
                        })
                        .collect();
                    (
                        *feature,
                        ShapeFunction::Curve {
                            knots,
                            missing: missing_of(missing_col),
                        },
                    )
                }
                Term::Linear {
                    feature,
                    col,
                    center,
                    range,
                    missing_col,
                } => {
                    let f = |x: f64| beta[*col] * (x - center);
                    (
                        *feature,
                        ShapeFunction::Curve {
                            knots: vec![(range.0, f(range.0)), (range.1, f(range.1))],
                            missing: missing_of(missing_col),
                        },
                    )
                }
                Term::Constant {
                    feature,
                    at,
                    missing_col,
                } => (
                    *feature,
                    ShapeFunction::Curve {
                        knots: vec![(*at, 0.0)],
                        missing: missing_of(missing_col),
                    },
                ),
                Term::Categorical {
                    feature,
                    start,
                    n_categories,
                } => {
                    let mut values = vec![0.0; n_categories + 1];
                    for c in 1..*n_categories {
                        values[c] = beta[start + c - 1];
                    }
                    (
                        *feature,
                        ShapeFunction::Binned {
                            layout: BinLayout::from_bins(&data.feature(*feature).bins),
                            values,
                        },
                    )
                }
            };
            FeatureShape {
                name: data.feature(feature).name.clone(),
                shape,
            }
        })
        .collect();
    AdditiveModel {
        algorithm: "spline".into(),
        seed: 0,
        intercept: beta[0],
        features,
        config_digest: String::new(),
        binning_digest: data.spec.digest(),
    }
}
