//! Footer statistics of the accuracy table and small table helpers.

use gamlab::metrics::average_ranks;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    /// Mean over datasets of the mean test AUC, in percent.
    pub average_auc: f64,
    /// Mean over datasets of the AUC rank (1 best, ties averaged).
    pub average_rank: f64,
    /// Mean over datasets of the AUC rescaled so the worst algorithm on a
    /// dataset scores 0 and the best 100.
    pub normalized_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub rows: Vec<AlgorithmSummary>,
    pub notes: Vec<String>,
}

/// `auc[d][a]` is the mean AUC (in `[0, 1]`) of algorithm `a` on dataset
/// `d`, or `None` when a cell is missing. Algorithms with a missing cell
/// are left out of every dataset's ranking.
pub fn summarize(datasets: &[String], algorithms: &[String], auc: &[Vec<Option<f64>>]) -> Summary {
    let mut notes = Vec::new();
    let kept: Vec<usize> = (0..algorithms.len())
        .filter(|&a| {
            let missing: Vec<&str> = datasets
                .iter()
                .zip(auc)
                .filter(|(_, row)| row[a].is_none())
                .map(|(d, _)| d.as_str())
                .collect();
            if !missing.is_empty() {
                notes.push(format!("{} excluded: no AUC on {}", algorithms[a], missing.join(", ")));
            }
            missing.is_empty()
        })
        .collect();
    if kept.is_empty() || datasets.is_empty() {
        return Summary {
            rows: Vec::new(),
            notes,
        };
    }
    let mut sums = vec![(0.0, 0.0, 0.0); kept.len()];
    for (d, row) in auc.iter().enumerate() {
        let values: Vec<f64> = kept.iter().map(|&a| row[a].expect("kept")).collect();
        let ranks = average_ranks(&values, true);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            notes.push(format!(
                "{}: all algorithms tie, normalized AUC set to 100",
                datasets[d]
            ));
        }
        for (k, &v) in values.iter().enumerate() {
            let norm = if hi > lo { 100.0 * (v - lo) / (hi - lo) } else { 100.0 };
            sums[k].0 += 100.0 * v;
            sums[k].1 += ranks[k];
            sums[k].2 += norm;
        }
    }
    let n = datasets.len() as f64;
    let rows = kept
        .iter()
        .zip(sums)
        .map(|(&a, (auc, rank, norm))| AlgorithmSummary {
            algorithm: algorithms[a].clone(),
            average_auc: auc / n,
            average_rank: rank / n,
            normalized_auc: norm / n,
        })
        .collect();
    Summary { rows, notes }
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
