use serde::{Deserialize, Serialize};

use crate::data::BinnedDataset;
use crate::error::{Error, Result};
use crate::metrics::accuracy::cross_entropy;
use crate::model::{logistic, AdditiveModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityStep {
    /// Feature added at this step; `None` for the intercept-only start.
    pub feature: Option<String>,
    pub val_error: f64,
    pub test_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub steps: Vec<DensityStep>,
    /// In `[0, 100]`; 50 for linear decay.
    pub score: f64,
    /// The full model was no better than the intercept on test rows.
    pub degenerate: bool,
}

/// Normalized area under an error curve `errors[0..=D]`: 100 times the
/// trapezoid mean of `(e_k - e_D) / (e_0 - e_D)` clamped to `[0,1]`, with the
/// end points fixed at 1 and 0. A curve that does not drop scores 50 and is
/// flagged.
pub fn density_from_errors(errors: &[f64]) -> (f64, bool) {
    let d = errors.len().saturating_sub(1);
    if d == 0 {
        return (50.0, true);
    }
    let (first, last) = (errors[0], errors[d]);
    if first <= last {
        return (50.0, true);
    }
    let norm = |k: usize| -> f64 {
        if k == 0 {
            1.0
        } else if k == d {
            0.0
        } else {
            ((errors[k] - last) / (first - last)).clamp(0.0, 1.0)
        }
    };
    let area: f64 = (0..d).map(|k| 0.5 * (norm(k) + norm(k + 1))).sum::<f64>() / d as f64;
    (100.0 * area, false)
}

/// Start from the intercept and greedily add back the existing shape that
/// lowers validation cross-entropy the most (lowest index on ties). The
/// score integrates the test-error curve.
pub fn feature_density(model: &AdditiveModel, data: &BinnedDataset) -> Result<DensityCurve> {
    let (val, test) = (&data.split.val, &data.split.test);
    if val.is_empty() || test.is_empty() {
        return Err(Error::Metric("feature density needs validation and test rows".into()));
    }
    let cols = model.bind(&data.raw)?;
    let labels = data.labels();
    let contributions = |rows: &[usize]| -> Vec<Vec<f64>> {
        model
            .features
            .iter()
            .zip(&cols)
            .map(|(f, &c)| {
                let col = &data.raw.columns[c];
                rows.iter().map(|&r| f.shape.eval(col.value(r))).collect()
            })
            .collect()
    };
    let (cv, ct) = (contributions(val), contributions(test));
    let yv: Vec<f64> = val.iter().map(|&r| labels[r]).collect();
    let yt: Vec<f64> = test.iter().map(|&r| labels[r]).collect();
    let error = |scores: &[f64], y: &[f64]| {
        let p: Vec<f64> = scores.iter().map(|&s| logistic(s)).collect();
        cross_entropy(&p, y)
    };
    let mut sv = vec![model.intercept; val.len()];
    let mut st = vec![model.intercept; test.len()];
    let mut steps = vec![DensityStep {
        feature: None,
        val_error: error(&sv, &yv),
        test_error: error(&st, &yt),
    }];
    let mut remaining: Vec<usize> = (0..model.features.len()).collect();
    while !remaining.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for (pos, &j) in remaining.iter().enumerate() {
            let trial: Vec<f64> = sv.iter().zip(&cv[j]).map(|(a, b)| a + b).collect();
            let e = error(&trial, &yv);
            if best.is_none_or(|(_, b)| e < b) {
                best = Some((pos, e));
            }
        }
        let (pos, val_error) = best.expect("remaining is non-empty");
        let j = remaining.remove(pos);
        sv.iter_mut().zip(&cv[j]).for_each(|(a, b)| *a += b);
        st.iter_mut().zip(&ct[j]).for_each(|(a, b)| *a += b);
        steps.push(DensityStep {
            feature: Some(model.features[j].name.clone()),
            val_error,
            test_error: error(&st, &yt),
        });
    }
    let errors: Vec<f64> = steps.iter().map(|s| s.test_error).collect();
    let (score, degenerate) = density_from_errors(&errors);
    Ok(DensityCurve {
        steps,
        score,
        degenerate,
    })
}
