mod common;

use common::oracles::{exhaustive_stump, pair_count_auc, tv_dual_oracle};
use gamlab::boost::best_stump;
use gamlab::data::Value;
use gamlab::metrics::auc;
use gamlab::model::{AdditiveModel, BinLayout, FeatureShape, ShapeFunction};
use gamlab::seed;
use gamlab::smooth::tv::{tv_denoise_1d, tv_objective};
use rand::Rng;

#[test]
fn stump_matches_exhaustive_search() {
    let mut rng = seed::rng(11);
    for case in 0..300 {
        let n_bins = rng.random_range(1..=8);
        let rows = rng.random_range(1..=50);
        let bins: Vec<u16> = (0..rows).map(|_| rng.random_range(0..n_bins) as u16).collect();
        // Multiples of 1/16 keep every partial sum exact.
        let g: Vec<f64> = (0..rows).map(|_| rng.random_range(-16..=16) as f64 / 16.0).collect();
        let h: Vec<f64> = (0..rows).map(|_| rng.random_range(1..=16) as f64 / 16.0).collect();
        let leaves = rng.random_range(2..=4);
        let lambda = [0.0, 0.5, 1.0][case % 3];
        let stump = best_stump(&bins, &g, &h, n_bins, leaves, lambda);
        let (cuts, gain) = exhaustive_stump(&bins, &g, &h, n_bins, leaves, lambda);
        assert_eq!(stump.cuts, cuts, "case {case}");
        assert_eq!(stump.gain, gain, "case {case}");
    }
}

#[test]
fn tv_matches_dual_oracle() {
    let mut rng = seed::rng(12);
    for case in 0..200 {
        let n = rng.random_range(1..=12);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let lambda = [1e-3, 1e-2, 1e-1, 1.0, 10.0][case % 5];
        let ours = tv_denoise_1d(&y, &w, lambda);
        let oracle = tv_dual_oracle(&y, &w, lambda);
        let (fo, fr) = (
            tv_objective(&y, &w, lambda, &ours),
            tv_objective(&y, &w, lambda, &oracle),
        );
        assert!(fo <= fr + 1e-6, "case {case}: {fo} vs {fr}");
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-5, "case {case}: {ours:?} vs {oracle:?}");
        }
    }
}

#[test]
fn tv_level_count_does_not_grow_with_lambda() {
    let mut rng = seed::rng(13);
    for _ in 0..20 {
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..40).map(|_| rng.random_range(0.5..2.0)).collect();
        let mut last = usize::MAX;
        for k in 0..30 {
            let lambda = 1e-3 * 1.4f64.powi(k);
            let theta = tv_denoise_1d(&y, &w, lambda);
            let levels = gamlab::smooth::tv::level_count(&theta);
            assert!(levels <= last);
            last = levels;
        }
    }
}

#[test]
fn tv_is_non_expansive_in_weighted_norm() {
    let mut rng = seed::rng(14);
    for _ in 0..100 {
        let n = rng.random_range(2..20);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = rng.random_range(0.0..0.5);
        let (ta, tb) = (tv_denoise_1d(&a, &w, lambda), tv_denoise_1d(&b, &w, lambda));
        let norm = |x: &[f64], y: &[f64]| -> f64 {
            x.iter()
                .zip(y)
                .zip(&w)
                .map(|((p, q), wi)| wi * (p - q) * (p - q))
                .sum::<f64>()
                .sqrt()
        };
        assert!(norm(&ta, &tb) <= norm(&a, &b) + 1e-9);
    }
}

#[test]
fn auc_matches_pair_counting() {
    let mut rng = seed::rng(15);
    for _ in 0..100 {
        let n = rng.random_range(2..=200);
        let mut labels: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.4))).collect();
        labels[0] = 1.0;
        labels[1] = 0.0;
        // Coarse scores so ties are common.
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..20) as f64 / 4.0).collect();
        assert_eq!(auc(&scores, &labels).unwrap(), pair_count_auc(&scores, &labels));
    }
}

#[test]
fn prediction_matches_hand_summation() {
    let mut rng = seed::rng(16);
    let features: Vec<FeatureShape> = (0..5)
        .map(|j| {
            let edges: Vec<f64> = (1..6).map(|e| e as f64 * 0.3 - 1.0).collect();
            let values = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            FeatureShape {
                name: format!("x{j}"),
                shape: ShapeFunction::Binned {
                    layout: BinLayout::Numeric { edges },
                    values,
                },
            }
        })
        .collect();
    let model = AdditiveModel {
        algorithm: "hand".into(),
        seed: 0,
        intercept: rng.random_range(-1.0..1.0),
        features,
        config_digest: String::new(),
        binning_digest: String::new(),
    };
    for _ in 0..20 {
        let row: Vec<f64> = (0..5).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mut expected = model.intercept;
        for (j, &x) in row.iter().enumerate() {
            let ShapeFunction::Binned {
                layout: BinLayout::Numeric { edges },
                values,
            } = &model.features[j].shape
            else {
                unreachable!()
            };
            let bin = edges.iter().filter(|&&e| e <= x).count();
            expected += values[bin];
        }
        let values: Vec<Value> = row.iter().map(|&x| Value::Num(x)).collect();
        assert_eq!(model.predict_score(&values).unwrap(), expected);
    }
}
