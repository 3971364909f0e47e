use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{encode, BinnedDataset, BinningSpec, RawDataset};
use crate::error::{Error, Result};
use crate::metrics::accuracy::cross_entropy;
use crate::model::AdditiveModel;
use crate::trainer::Trainer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRow {
    pub group: String,
    pub n: usize,
    pub loss: f64,
    pub reference_loss: Option<f64>,
    /// `100 (loss - reference_loss) / reference_loss`.
    pub relative_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub column: String,
    /// All rows together.
    pub overall: SubgroupRow,
    /// One row per distinct value, sorted by token.
    pub groups: Vec<SubgroupRow>,
    pub notes: Vec<String>,
}

/// Cross-entropy of `model` on `rows`, overall and per value of
/// `group_column`, optionally relative to `reference`.
pub fn subgroup_report(
    model: &AdditiveModel,
    data: &RawDataset,
    rows: &[usize],
    group_column: &str,
    reference: Option<&AdditiveModel>,
) -> Result<SubgroupReport> {
    let column = data.column(group_column)?;
    if rows.is_empty() {
        return Err(Error::Metric("no rows to report on".into()));
    }
    let p = model.probabilities(data, rows)?;
    let q = reference.map(|r| r.probabilities(data, rows)).transpose()?;
    let t: Vec<f64> = rows.iter().map(|&r| data.labels[r]).collect();
    let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, &r) in rows.iter().enumerate() {
        members.entry(column.token(r)).or_default().push(i);
    }
    let summarize = |group: String, idx: &[usize]| {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let tt = pick(&t);
        let loss = cross_entropy(&pick(&p), &tt);
        let reference_loss = q.as_ref().map(|q| cross_entropy(&pick(q), &tt));
        SubgroupRow {
            group,
            n: idx.len(),
            loss,
            reference_loss,
            relative_pct: reference_loss.map(|r| 100.0 * (loss - r) / r),
        }
    };
    let everyone: Vec<usize> = (0..rows.len()).collect();
    Ok(SubgroupReport {
        column: group_column.to_string(),
        overall: summarize("All".to_string(), &everyone),
        groups: members.into_iter().map(|(g, idx)| summarize(g, &idx)).collect(),
        notes: Vec::new(),
    })
}

/// Retrain `trainer` without `feature`, keeping the split, the other
/// features' bins, and the seed.
pub fn ablate_and_retrain(trainer: &Trainer, data: &BinnedDataset, feature: &str, seed: u64) -> Result<AdditiveModel> {
    let raw = data.raw.without_feature(feature)?;
    let spec = BinningSpec {
        max_bins: data.spec.max_bins,
        features: data
            .spec
            .features
            .iter()
            .filter(|f| f.name != feature)
            .cloned()
            .collect(),
    };
    let ablated = encode(Arc::new(raw), spec, data.split.clone())?;
    trainer.fit(&ablated, seed)
}
