//! Exact weighted 1-D total-variation denoising:
//!
//! ```text
//! argmin_theta  sum_i w_i (y_i - theta_i)^2 / 2  +  lambda * sum_i |theta_{i+1} - theta_i|
//! ```
//!
//! Solved by the linear-time dynamic program that tracks the derivative of
//! the forward message as a piecewise-linear function (Johnson, 2013).

/// Weighted mean `sum w y / sum w`.
pub fn weighted_mean(y: &[f64], w: &[f64]) -> f64 {
    let (num, den) = y
        .iter()
        .zip(w)
        .fold((0.0, 0.0), |(n, d), (&yi, &wi)| (n + wi * yi, d + wi));
    num / den
}

/// Smallest `lambda` at which the solution is the constant weighted mean:
/// the largest absolute partial sum of `w_i (y_i - mean)`.
pub fn saturation_lambda(y: &[f64], w: &[f64]) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let mean = weighted_mean(y, w);
    let mut acc = 0.0;
    let mut max = 0.0f64;
    for (&yi, &wi) in y[..y.len() - 1].iter().zip(w) {
        acc += wi * (yi - mean);
        max = max.max(acc.abs());
    }
    max
}

/// Objective value of `theta` for the weighted TV problem.
pub fn tv_objective(y: &[f64], w: &[f64], lambda: f64, theta: &[f64]) -> f64 {
    let fit: f64 = y
        .iter()
        .zip(w)
        .zip(theta)
        .map(|((&yi, &wi), &ti)| 0.5 * wi * (yi - ti) * (yi - ti))
        .sum();
    let tv: f64 = theta.windows(2).map(|p| (p[1] - p[0]).abs()).sum();
    fit + lambda * tv
}

/// Exact minimizer. Requires `w_i > 0` and `lambda >= 0`; panics on
/// mismatched lengths.
pub fn tv_denoise_1d(y: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
    assert_eq!(y.len(), w.len(), "y and w lengths differ");
    let n = y.len();
    if n <= 1 || lambda <= 0.0 {
        return y.to_vec();
    }
    if lambda >= saturation_lambda(y, w) {
        return vec![weighted_mean(y, w); n];
    }

    // Knots of the message derivative live in x[l..=r]; a[k], b[k] are the
    // slope/offset increments contributed when crossing knot k.
    let mut x = vec![0.0; 2 * n];
    let mut a = vec![0.0; 2 * n];
    let mut b = vec![0.0; 2 * n];
    // Back-pointer clamps: theta_k = clamp(theta_{k+1}, lo[k], hi[k]).
    let mut lo_knot = vec![0.0; n - 1];
    let mut hi_knot = vec![0.0; n - 1];

    lo_knot[0] = y[0] - lambda / w[0];
    hi_knot[0] = y[0] + lambda / w[0];
    let mut l = n - 1;
    let mut r = n;
    x[l] = lo_knot[0];
    x[r] = hi_knot[0];
    a[l] = w[0];
    b[l] = -w[0] * y[0] + lambda;
    a[r] = -w[0];
    b[r] = w[0] * y[0] + lambda;
    let mut a_first = w[1];
    let mut b_first = -lambda - w[1] * y[1];
    let mut a_last = -w[1];
    let mut b_last = w[1] * y[1] - lambda;

    for k in 1..n - 1 {
        // Walk up from the left until the derivative exceeds -lambda.
        let (mut alo, mut blo) = (a_first, b_first);
        let mut lo = l;
        while lo <= r {
            if alo * x[lo] + blo > -lambda {
                break;
            }
            alo += a[lo];
            blo += b[lo];
            lo += 1;
        }
        lo_knot[k] = (-lambda - blo) / alo;
        l = lo - 1;
        x[l] = lo_knot[k];

        // Walk down from the right until the derivative drops below lambda.
        let (mut ahi, mut bhi) = (a_last, b_last);
        let mut hi = r as isize;
        while hi >= l as isize {
            let h = hi as usize;
            if -ahi * x[h] - bhi < lambda {
                break;
            }
            ahi += a[h];
            bhi += b[h];
            hi -= 1;
        }
        hi_knot[k] = (lambda + bhi) / (-ahi);
        r = (hi + 1) as usize;
        x[r] = hi_knot[k];

        a[l] = alo;
        b[l] = blo + lambda;
        a[r] = ahi;
        b[r] = bhi + lambda;
        a_first = w[k + 1];
        b_first = -lambda - w[k + 1] * y[k + 1];
        a_last = -w[k + 1];
        b_last = w[k + 1] * y[k + 1] - lambda;
    }

    // The last coefficient sits where the full derivative crosses zero.
    let (mut alo, mut blo) = (a_first, b_first);
    let mut lo = l;
    while lo <= r {
        if alo * x[lo] + blo > 0.0 {
            break;
        }
        alo += a[lo];
        blo += b[lo];
        lo += 1;
    }
    let mut theta = vec![0.0; n];
    theta[n - 1] = -blo / alo;
    for k in (0..n - 1).rev() {
        theta[k] = theta[k + 1].clamp(lo_knot[k], hi_knot[k]);
    }
    theta
}

/// Number of distinct consecutive levels (runs) in a fitted sequence.
pub fn level_count(theta: &[f64]) -> usize {
    if theta.is_empty() {
        return 0;
    }
    1 + theta.windows(2).filter(|p| p[0] != p[1]).count()
}
