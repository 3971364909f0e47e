use crate::error::{Error, Result};
use crate::metrics::rank::average_ranks;

pub const PROB_CLIP: f64 = 1e-12;

/// Area under the ROC curve by the rank-sum formula. Tied scores share
/// their average rank, so each tied positive/negative pair counts one half.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Metric("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y >= 0.5).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric("AUC needs both classes".into()));
    }
    // Ascending ranks: rank the negated scores with higher-is-better.
    let ranks = average_ranks(scores, false);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y >= 0.5)
        .map(|(r, _)| r)
        .sum();
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean of `-[t ln p + (1-t) ln(1-p)]` with `p` clipped to
/// `[1e-12, 1-1e-12]`. `t` may be soft.
pub fn cross_entropy(p: &[f64], t: &[f64]) -> f64 {
    assert_eq!(p.len(), t.len(), "p and t differ in length");
    if p.is_empty() {
        return 0.0;
    }
    p.iter()
        .zip(t)
        .map(|(&p, &t)| {
            let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / p.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_tied() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[0.0, 0.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(auc(&[0.5; 6], &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn cross_entropy_closed_forms() {
        assert!((cross_entropy(&[0.5; 4], &[0.5; 4]) - std::f64::consts::LN_2).abs() < 1e-15);
        let ce = cross_entropy(&[1.0, 0.0], &[1.0, 0.0]);
        assert!(ce > 0.0 && ce < 1e-11);
    }
}
