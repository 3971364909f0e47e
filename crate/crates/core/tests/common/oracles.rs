//! Slow, independent reference implementations used by tests.
#![allow(dead_code)]

/// Every strictly increasing cut vector over `1..n_bins` with fewer than
/// `leaves` cuts whose leaves all hold at least one row. Returns the best
/// `(cuts, gain)`, preferring fewer cuts and then the lexicographically
/// smallest vector among equal totals.
pub fn exhaustive_stump(
    bins: &[u16],
    g: &[f64],
    h: &[f64],
    n_bins: usize,
    leaves: usize,
    lambda: f64,
) -> (Vec<usize>, f64) {
    let score = |lo: usize, hi: usize| -> Option<f64> {
        let mut gs = 0.0;
        let mut hs = 0.0;
        let mut rows = 0;
        for (i, &b) in bins.iter().enumerate() {
            let b = b as usize;
            if b >= lo && b < hi {
                gs += g[i];
                hs += h[i];
                rows += 1;
            }
        }
        if rows == 0 {
            return None;
        }
        let d = hs + lambda;
        Some(if d > 0.0 { gs * gs / d } else { 0.0 })
    };
    let root = score(0, n_bins).unwrap_or(0.0);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut stack: Vec<Vec<usize>> = vec![vec![]];
    let mut candidates = Vec::new();
    while let Some(cuts) = stack.pop() {
        candidates.push(cuts.clone());
        if cuts.len() + 1 < leaves {
            let start = cuts.last().map_or(1, |&c| c + 1);
            for c in start..n_bins {
                let mut next = cuts.clone();
                next.push(c);
                stack.push(next);
            }
        }
    }
    for cuts in candidates {
        let mut bounds = vec![0];
        bounds.extend(&cuts);
        bounds.push(n_bins);
        let mut total = 0.0;
        let mut valid = true;
        for w in bounds.windows(2) {
            match score(w[0], w[1]) {
                Some(s) => total += s,
                None => valid = false,
            }
        }
        if !valid && !cuts.is_empty() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bc, bt)) => total > *bt || (total == *bt && (cuts.len(), &cuts) < (bc.len(), bc)),
        };
        if better {
            best = Some((cuts, total));
        }
    }
    let (cuts, total) = best.unwrap();
    (cuts, total - root)
}

/// TV denoising through its box-constrained dual, solved by exact
/// coordinate minimization until the iterates stop moving.
///
/// Primal: `min sum w_i (y_i - t_i)^2 / 2 + lambda sum |t_{i+1} - t_i|`.
/// Dual: `min_u |u|_inf <= lambda  (D'u)' W^-1 (D'u) / 2 - u' D y`, with
/// `t = y - W^-1 D'u`.
pub fn tv_dual_oracle(y: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    if n < 2 {
        return y.to_vec();
    }
    let m = n - 1;
    let mut u = vec![0.0; m];
    // t = y - W^-1 D'u where (D'u)_i = u_{i-1} - u_i.
    let theta = |u: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let left = if i > 0 { u[i - 1] } else { 0.0 };
                let right = if i < m { u[i] } else { 0.0 };
                y[i] - (left - right) / w[i]
            })
            .collect()
    };
    for _ in 0..2_000_000 {
        let mut moved = 0.0f64;
        for k in 0..m {
            // The dual gradient in u_k is -(t_{k+1} - t_k); its curvature is
            // 1/w_k + 1/w_{k+1}.
            let left = if k > 0 { u[k - 1] } else { 0.0 };
            let right = if k + 1 < m { u[k + 1] } else { 0.0 };
            let tk_wo = y[k] - left / w[k];
            let tk1_wo = y[k + 1] + right / w[k + 1];
            let curv = 1.0 / w[k] + 1.0 / w[k + 1];
            let target = ((tk1_wo - tk_wo) / curv).clamp(-lambda, lambda);
            moved = moved.max((target - u[k]).abs());
            u[k] = target;
        }
        if moved < 1e-14 * (1.0 + lambda) {
            break;
        }
    }
    theta(&u)
}

/// Fraction of (positive, negative) pairs ordered correctly, ties 1/2.
pub fn pair_count_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &yi) in labels.iter().enumerate() {
        if yi < 0.5 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj >= 0.5 {
                continue;
            }
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}
