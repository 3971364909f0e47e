use crate::error::{Error, Result};

/// 1-based ranks with ties sharing their average rank. With
/// `higher_is_better` the largest value gets rank 1; otherwise the smallest.
pub fn average_ranks(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        if higher_is_better {
            c.reverse()
        } else {
            c
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) share the mean of ranks i+1..=j.
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Per algorithm, the mean over datasets of `max(0, rank_fidelity -
/// rank_auc)`. Tables are `[dataset][algorithm]`, higher is better in
/// both; rank 1 is best.
pub fn rank_gap(auc_table: &[Vec<f64>], fidelity_table: &[Vec<f64>]) -> Result<Vec<f64>> {
    if auc_table.len() != fidelity_table.len() || auc_table.is_empty() {
        return Err(Error::Metric("AUC and fidelity tables cover different datasets".into()));
    }
    let n_alg = auc_table[0].len();
    let mut gap = vec![0.0; n_alg];
    for (a, f) in auc_table.iter().zip(fidelity_table) {
        if a.len() != n_alg || f.len() != n_alg {
            return Err(Error::Metric(
                "AUC and fidelity tables cover different algorithms".into(),
            ));
        }
        let ra = average_ranks(a, true);
        let rf = average_ranks(f, true);
        for k in 0..n_alg {
            gap[k] += (rf[k] - ra[k]).max(0.0);
        }
    }
    let n = auc_table.len() as f64;
    Ok(gap.into_iter().map(|g| g / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0], true), vec![1.5, 4.0, 1.5, 3.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0], false), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(average_ranks(&[7.0; 3], true), vec![2.0; 3]);
    }

    #[test]
    fn gap_arithmetic() {
        // Algorithm 0 is best in AUC and worst of five in fidelity.
        let auc = vec![vec![0.9, 0.8, 0.7, 0.6, 0.5]];
        let fid = vec![vec![10.0, 90.0, 80.0, 70.0, 60.0]];
        let g = rank_gap(&auc, &fid).unwrap();
        assert_eq!(g[0], 4.0);
        assert!(g[1..].iter().all(|&x| x == 0.0));
        assert_eq!(rank_gap(&auc, &auc).unwrap(), vec![0.0; 5]);
        assert!(rank_gap(&auc, &[]).is_err());
    }
}
