#![allow(dead_code)]

pub mod oracles;

use std::sync::Arc;

use gamlab::data::{make_split, Column, DEFAULT_FRACTIONS};
use gamlab::model::{logistic, BinLayout, FeatureShape};
use gamlab::{seed, AdditiveModel, BinnedDataset, RawDataset, ShapeFunction};
use rand::Rng;

/// `d` uniform(-1, 1) features `x0..`, labels Bernoulli(logistic(logit(x))).
pub fn synthetic(n: usize, d: usize, seed_value: u64, logit: impl Fn(&[f64]) -> f64) -> RawDataset {
    let mut rng = seed::rng(seed_value);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels = rows
        .iter()
        .map(|x| {
            if rng.random::<f64>() < logistic(logit(x)) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let columns = (0..d)
        .map(|j| Column::numeric(format!("x{j}"), rows.iter().map(|r| Some(r[j])).collect()))
        .collect();
    RawDataset::new("synthetic", "y", columns, labels).unwrap()
}

pub fn prepared(raw: RawDataset, seed_value: u64, max_bins: usize) -> BinnedDataset {
    let split = make_split(&raw, seed_value, DEFAULT_FRACTIONS).unwrap();
    BinnedDataset::prepare(Arc::new(raw), split, max_bins).unwrap()
}

pub fn mean_logloss(scores: &[f64], labels: &[f64]) -> f64 {
    scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let p = logistic(s).clamp(1e-12, 1.0 - 1e-12);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / scores.len() as f64
}

/// A binned model on `data.spec` with uniform(-scale, scale) bin values.
pub fn random_model(data: &BinnedDataset, seed_value: u64, scale: f64) -> AdditiveModel {
    let mut rng = seed::rng(seed_value);
    let features = data
        .spec
        .features
        .iter()
        .map(|f| FeatureShape {
            name: f.name.clone(),
            shape: ShapeFunction::Binned {
                layout: BinLayout::from_bins(&f.bins),
                values: (0..f.n_bins()).map(|_| rng.random_range(-scale..=scale)).collect(),
            },
        })
        .collect();
    AdditiveModel {
        algorithm: "random".into(),
        seed: seed_value,
        intercept: rng.random_range(-1.0..1.0),
        features,
        config_digest: String::new(),
        binning_digest: data.spec.digest(),
    }
}

/// Mixed numeric/categorical data with a group column `g` and some missing
/// values.
pub fn mixed(n: usize, seed_value: u64) -> RawDataset {
    let mut rng = seed::rng(seed_value);
    let cats = ["a", "b", "c", "d"];
    let mut x = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = rng.random_range(-2.0..2.0);
        let ci = rng.random_range(0..cats.len());
        let logit = xi + if ci == 1 { 1.5 } else { -0.5 };
        labels.push(if rng.random::<f64>() < logistic(logit) {
            1.0
        } else {
            0.0
        });
        x.push(if rng.random::<f64>() < 0.05 { None } else { Some(xi) });
        c.push(Some(cats[ci].to_string()));
    }
    let columns = vec![Column::numeric("x", x), Column::categorical("c", c)];
    RawDataset::new("mixed", "y", columns, labels).unwrap()
}
