//! Shape distance between models and worst-case fidelity on
//! semi-synthetic data whose labels come from a known generator model.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{encode, BinnedDataset, RawDataset};
use crate::error::{Error, Result};
use crate::model::AdditiveModel;
use crate::seed;
use crate::trainer::Trainer;

/// Mean over all rows of `sum_j |f_j(x_ij) - g_j(x_ij)|`, after both models
/// are discretized onto `data.spec` and centered on every row of `data`.
/// Features are matched by name.
pub fn shape_distance(a: &AdditiveModel, b: &AdditiveModel, data: &BinnedDataset) -> Result<f64> {
    let mut names_a = a.feature_names();
    let mut names_b = b.feature_names();
    names_a.sort_unstable();
    names_b.sort_unstable();
    if names_a != names_b {
        return Err(Error::Metric(format!(
            "feature sets differ: {names_a:?} vs {names_b:?}"
        )));
    }
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    if rows.is_empty() {
        return Ok(0.0);
    }
    let a = a.discretize(&data.spec)?.center(&data.raw, &rows)?;
    let b = b.discretize(&data.spec)?.center(&data.raw, &rows)?;
    let cols = a.bind(&data.raw)?;
    let mut total = 0.0;
    for (fa, &c) in a.features.iter().zip(&cols) {
        let fb = &b.features[b.feature_index(&fa.name).expect("checked above")];
        let col = &data.raw.columns[c];
        total += rows
            .iter()
            .map(|&r| {
                let v = col.value(r);
                (fa.shape.eval(v) - fb.shape.eval(v)).abs()
            })
            .sum::<f64>();
    }
    Ok(total / rows.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    #[default]
    Bernoulli,
    /// Labels are the generator's probabilities.
    Soft,
}

#[derive(Debug, Clone)]
pub struct SemiSynthetic {
    pub data: RawDataset,
    pub generator: AdditiveModel,
}

/// Same features, labels regenerated from `generator`.
pub fn make_semisynthetic(
    generator: &AdditiveModel,
    data: &RawDataset,
    seed: u64,
    mode: LabelMode,
) -> Result<SemiSynthetic> {
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let p = generator.probabilities(data, &rows)?;
    let labels = match mode {
        LabelMode::Soft => p,
        LabelMode::Bernoulli => {
            let mut rng = seed::rng(seed);
            p.iter()
                .map(|&pi| if rng.random::<f64>() < pi { 1.0 } else { 0.0 })
                .collect()
        }
    };
    Ok(SemiSynthetic {
        data: data.with_labels(labels)?,
        generator: generator.clone(),
    })
}

/// Raw distances and normalized scores, indexed `[generator][candidate]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityTable {
    pub generators: Vec<String>,
    pub candidates: Vec<String>,
    pub distances: Vec<Vec<f64>>,
    /// Per generator: 100 for the closest candidate, 0 for the farthest.
    pub scores: Vec<Vec<f64>>,
    /// Minimum score over generators, per candidate.
    pub worst_case: Vec<f64>,
    /// Generators whose candidates were all equally distant.
    pub flagged: Vec<bool>,
}

/// Min-max normalization with lower distance scoring higher. All-equal
/// input scores 100 everywhere and is flagged.
pub fn normalize_distances(distances: &[f64]) -> (Vec<f64>, bool) {
    let lo = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return (vec![100.0; distances.len()], true);
    }
    let scores = distances
        .iter()
        .map(|&d| {
            if d == lo {
                100.0
            } else if d == hi {
                0.0
            } else {
                100.0 * (hi - d) / (hi - lo)
            }
        })
        .collect();
    (scores, false)
}

impl FidelityTable {
    pub fn from_distances(generators: Vec<String>, candidates: Vec<String>, distances: Vec<Vec<f64>>) -> Result<Self> {
        if candidates.len() < 2 {
            return Err(Error::Metric("fidelity needs at least two candidates".into()));
        }
        if distances.len() != generators.len() || distances.iter().any(|d| d.len() != candidates.len()) {
            return Err(Error::Metric("distance table does not match its labels".into()));
        }
        let (scores, flagged): (Vec<Vec<f64>>, Vec<bool>) = distances.iter().map(|d| normalize_distances(d)).unzip();
        let worst_case = (0..candidates.len())
            .map(|c| scores.iter().map(|s| s[c]).fold(f64::INFINITY, f64::min))
            .collect();
        Ok(FidelityTable {
            generators,
            candidates,
            distances,
            scores,
            worst_case,
            flagged,
        })
    }
}

/// Fit generator number `index` on `data`'s training split, regenerate the
/// labels of every row, fit each candidate on the same split and binning,
/// and return each candidate's distance to the generator.
pub fn generator_distances(
    data: &BinnedDataset,
    generator: &Trainer,
    index: usize,
    candidates: &[Trainer],
    seed: u64,
    mode: LabelMode,
) -> Result<Vec<f64>> {
    let gen_seed = seed::derive(seed, index as u64);
    let truth = generator.fit(data, gen_seed)?;
    let semi = make_semisynthetic(&truth, &data.raw, seed::derive(gen_seed, 1), mode)?;
    let semi_data = encode(Arc::new(semi.data), data.spec.clone(), data.split.clone())?;
    candidates
        .iter()
        .map(|c| {
            let m = c.fit(&semi_data, seed)?;
            shape_distance(&m, &truth, &semi_data)
        })
        .collect()
}

/// [`generator_distances`] for every generator, normalized per generator.
pub fn worst_case_fidelity(
    data: &BinnedDataset,
    generators: &[Trainer],
    candidates: &[Trainer],
    seed: u64,
    mode: LabelMode,
) -> Result<FidelityTable> {
    let distances = generators
        .iter()
        .enumerate()
        .map(|(gi, g)| generator_distances(data, g, gi, candidates, seed, mode))
        .collect::<Result<Vec<_>>>()?;
    let names = |ts: &[Trainer]| ts.iter().map(|t| t.algorithm().id().to_string()).collect();
    FidelityTable::from_distances(names(generators), names(candidates), distances)
}
