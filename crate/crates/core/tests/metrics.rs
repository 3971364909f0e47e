mod common;

use std::sync::Arc;

use common::{mixed, prepared, random_model, synthetic};
use gamlab::data::{encode, make_split, DEFAULT_FRACTIONS};
use gamlab::metrics::biasvar::round_losses;
use gamlab::metrics::{
    ablate_and_retrain, bias_variance, cross_entropy, density_from_errors, feature_density, make_semisynthetic,
    shape_distance, subgroup_report, worst_case_fidelity, BiasVarianceConfig, LabelMode, LossMode,
};
use gamlab::trainer::{Algorithm, Scale};
use gamlab::{seed, BinnedDataset, Trainer};
use rand::Rng;

/// Direct summation: per feature, center each model's per-row values over
/// all rows, then average the summed absolute differences.
fn distance_oracle(a: &gamlab::AdditiveModel, b: &gamlab::AdditiveModel, data: &BinnedDataset) -> f64 {
    let n = data.n_rows();
    let mut total = 0.0;
    for (j, f) in data.spec.features.iter().enumerate() {
        let col: Vec<_> = (0..n).map(|r| data.value(j, r)).collect();
        let va: Vec<f64> = col
            .iter()
            .map(|&v| a.features[a.feature_index(&f.name).unwrap()].shape.eval(v))
            .collect();
        let vb: Vec<f64> = col
            .iter()
            .map(|&v| b.features[b.feature_index(&f.name).unwrap()].shape.eval(v))
            .collect();
        let ma = va.iter().sum::<f64>() / n as f64;
        let mb = vb.iter().sum::<f64>() / n as f64;
        total += va
            .iter()
            .zip(&vb)
            .map(|(x, y)| ((x - ma) - (y - mb)).abs())
            .sum::<f64>();
    }
    total / n as f64
}

#[test]
fn shape_distance_matches_direct_summation() {
    let data = prepared(mixed(700, 1), 1, 32);
    for s in 0..20 {
        let a = random_model(&data, 2 * s, 2.0);
        let b = random_model(&data, 2 * s + 1, 2.0);
        let got = shape_distance(&a, &b, &data).unwrap();
        let want = distance_oracle(&a, &b, &data);
        assert!((got - want).abs() <= 1e-12 * (1.0 + want), "{got} vs {want}");
        assert_eq!(shape_distance(&a, &a, &data).unwrap(), 0.0);
    }
}

#[test]
fn shape_distance_ignores_offsets_and_feature_order() {
    let data = prepared(mixed(400, 2), 2, 32);
    let a = random_model(&data, 3, 1.0);
    let mut b = a.clone();
    b.intercept += 5.0;
    b.features.reverse();
    if let gamlab::ShapeFunction::Binned { values, .. } = &mut b.features[0].shape {
        values.iter_mut().for_each(|v| *v += 3.0);
    }
    assert!(shape_distance(&a, &b, &data).unwrap() < 1e-12);
    let mut c = a.clone();
    c.features.pop();
    assert!(shape_distance(&a, &c, &data).is_err());
}

#[test]
fn density_ranks_the_signal_feature_first() {
    let data = prepared(synthetic(3000, 4, 3, |x| 3.0 * x[0]), 3, 64);
    let model = Trainer::preset(Algorithm::Ebm, Scale::Desk).fit(&data, 3).unwrap();
    let curve = feature_density(&model, &data).unwrap();
    assert_eq!(curve.steps.len(), 5);
    assert_eq!(curve.steps[1].feature.as_deref(), Some("x0"));
    assert!(!curve.degenerate);
    assert!(curve.score < 30.0, "score {}", curve.score);
}

#[test]
fn density_of_hand_curves() {
    // Linear drop over D=4 steps has area one half.
    assert!((density_from_errors(&[4.0, 3.0, 2.0, 1.0, 0.0]).0 - 50.0).abs() < 1e-12);
    // Everything at the first step.
    assert_eq!(density_from_errors(&[4.0, 0.0, 0.0, 0.0, 0.0]).0, 12.5);
    // Nothing until the last step.
    assert_eq!(density_from_errors(&[4.0, 4.0, 4.0, 4.0, 0.0]).0, 87.5);
    assert_eq!(density_from_errors(&[1.0, 1.0]), (50.0, true));
}

#[test]
fn constant_trainer_has_zero_variance() {
    let raw = synthetic(600, 1, 4, |x| x[0]);
    let labels = raw.labels.clone();
    let cfg = BiasVarianceConfig::default();
    let est = bias_variance(&labels, &cfg, |_, test, _| Ok(vec![0.37; test.len()])).unwrap();
    assert_eq!(est.variance, 0.0);
    assert_eq!(est.rounds.len(), cfg.rounds);
    for r in &est.rounds {
        assert!((r.empirical_bias - r.mean_loss).abs() < 1e-12);
    }
}

#[test]
fn squared_loss_decomposes_exactly() {
    let mut rng = seed::rng(5);
    for _ in 0..50 {
        let n = rng.random_range(1..40);
        let k = rng.random_range(1..8);
        let t: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<bool>())).collect();
        let preds: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
        let (bias, var, total) = round_losses(&preds, &t, LossMode::Squared);
        assert!((bias + var - total).abs() < 1e-10);
        let (bias, _, total) = round_losses(&preds, &t, LossMode::LogLoss);
        assert!(bias <= total + 1e-12);
    }
}

#[test]
fn bias_variance_with_a_real_trainer() {
    let raw = Arc::new(synthetic(1500, 2, 6, |x| 2.0 * x[0]));
    let labels = raw.labels.clone();
    let trainer = Trainer::preset(Algorithm::Lr, Scale::Desk);
    let cfg = BiasVarianceConfig {
        rounds: 6,
        reps: 4,
        ..Default::default()
    };
    let run = || {
        bias_variance(&labels, &cfg, |train, test, s| {
            let model = trainer.fit_rows(raw.clone(), train, s)?;
            model.probabilities(&raw, test)
        })
        .unwrap()
    };
    let est = run();
    assert!(est.variance > 0.0);
    assert!(est.rounds.iter().all(|r| r.jensen_holds(1e-12)));
    assert!(est.discarded.is_empty());
    assert_eq!(est, run());
}

#[test]
fn failing_rounds_are_discarded_then_rejected() {
    let labels: Vec<f64> = (0..200).map(|i| f64::from(i % 3 == 0)).collect();
    let cfg = BiasVarianceConfig {
        rounds: 8,
        min_rounds: 6,
        ..Default::default()
    };
    let flaky = |fail_below: u64| {
        move |_: &[usize], test: &[usize], s: u64| {
            if s % 8 < fail_below {
                Err(gamlab::Error::Metric("boom".into()))
            } else {
                Ok(vec![0.5; test.len()])
            }
        }
    };
    assert!(bias_variance(&labels, &cfg, flaky(0)).unwrap().discarded.is_empty());
    assert!(bias_variance(&labels, &cfg, flaky(8)).is_err());
}

#[test]
fn semisynthetic_labels_follow_the_generator() {
    let raw = synthetic(20000, 2, 7, |x| x[0]);
    let data = prepared(raw.clone(), 7, 32);
    let generator = random_model(&data, 8, 1.0);
    let rows: Vec<usize> = (0..raw.n_rows()).collect();
    let p = generator.probabilities(&raw, &rows).unwrap();

    let soft = make_semisynthetic(&generator, &raw, 1, LabelMode::Soft).unwrap();
    assert_eq!(soft.data.labels, p);

    let hard = make_semisynthetic(&generator, &raw, 1, LabelMode::Bernoulli).unwrap();
    assert!(hard.data.labels.iter().all(|&y| y == 0.0 || y == 1.0));
    let (mean_y, mean_p) = (
        hard.data.labels.iter().sum::<f64>() / rows.len() as f64,
        p.iter().sum::<f64>() / rows.len() as f64,
    );
    let sd = (p.iter().map(|q| q * (1.0 - q)).sum::<f64>()).sqrt() / rows.len() as f64;
    assert!((mean_y - mean_p).abs() < 5.0 * sd);
    let again = make_semisynthetic(&generator, &raw, 1, LabelMode::Bernoulli).unwrap();
    assert_eq!(again.data.labels, hard.data.labels);
    assert_eq!(hard.data.columns, raw.columns);
}

#[test]
fn fidelity_table_is_consistent() {
    let data = prepared(synthetic(800, 2, 9, |x| x[0] - x[1] * x[1]), 9, 32);
    let gens = [Algorithm::Lr, Algorithm::Mlr].map(|a| Trainer::preset(a, Scale::Desk));
    let cands = [Algorithm::Lr, Algorithm::Mlr, Algorithm::Spline].map(|a| Trainer::preset(a, Scale::Desk));
    let table = worst_case_fidelity(&data, &gens, &cands, 9, LabelMode::Bernoulli).unwrap();
    assert_eq!(table.distances.len(), 2);
    for (g, row) in table.scores.iter().enumerate() {
        assert_eq!(row.len(), 3);
        assert!(row.iter().all(|&s| (0.0..=100.0).contains(&s)));
        if !table.flagged[g] {
            assert!(row.contains(&100.0) && row.contains(&0.0));
        }
    }
    for c in 0..3 {
        let min = table.scores.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
        assert_eq!(table.worst_case[c], min);
    }
}

#[test]
fn subgroup_report_bookkeeping() {
    let raw = mixed(2000, 10);
    let data = prepared(raw.clone(), 10, 32);
    let model = random_model(&data, 11, 0.5);
    let rows = &data.split.test;
    let report = subgroup_report(&model, &raw, rows, "c", Some(&model)).unwrap();
    assert_eq!(report.overall.n, rows.len());
    assert_eq!(report.groups.iter().map(|g| g.n).sum::<usize>(), rows.len());
    let weighted = report.groups.iter().map(|g| g.loss * g.n as f64).sum::<f64>() / rows.len() as f64;
    assert!((weighted - report.overall.loss).abs() < 1e-12);
    for g in std::iter::once(&report.overall).chain(&report.groups) {
        assert_eq!(g.relative_pct, Some(0.0));
    }
    let names: Vec<&str> = report.groups.iter().map(|g| g.group.as_str()).collect();
    assert_eq!(names, ["a", "b", "c", "d"]);

    let p = model.probabilities(&raw, rows).unwrap();
    let t: Vec<f64> = rows.iter().map(|&r| raw.labels[r]).collect();
    assert_eq!(report.overall.loss, cross_entropy(&p, &t));
    let other = random_model(&data, 12, 0.5);
    let rel = subgroup_report(&model, &raw, rows, "c", Some(&other)).unwrap();
    let o = &rel.overall;
    let want = 100.0 * (o.loss - o.reference_loss.unwrap()) / o.reference_loss.unwrap();
    assert_eq!(o.relative_pct, Some(want));
}

#[test]
fn ablating_a_noise_feature_barely_moves_loss() {
    let raw = synthetic(5000, 2, 13, |x| 2.5 * x[0]);
    let split = make_split(&raw, 13, DEFAULT_FRACTIONS).unwrap();
    let data = BinnedDataset::prepare(Arc::new(raw), split, 64).unwrap();
    let trainer = Trainer::preset(Algorithm::Ebm, Scale::Desk);
    let full = trainer.fit(&data, 13).unwrap();
    let ablated = ablate_and_retrain(&trainer, &data, "x1", 13).unwrap();
    assert_eq!(ablated.feature_names(), ["x0"]);
    let test = &data.split.test;
    let t: Vec<f64> = test.iter().map(|&r| data.labels()[r]).collect();
    let lf = cross_entropy(&full.probabilities(&data.raw, test).unwrap(), &t);
    let la = cross_entropy(&ablated.probabilities(&data.raw, test).unwrap(), &t);
    assert!(((la - lf) / lf).abs() < 0.005, "{lf} -> {la}");

    // The kept feature's bins are untouched.
    let raw2 = data.raw.without_feature("x1").unwrap();
    let spec2 = gamlab::BinningSpec {
        max_bins: data.spec.max_bins,
        features: vec![data.spec.features[0].clone()],
    };
    let re = encode(Arc::new(raw2), spec2, data.split.clone()).unwrap();
    assert_eq!(re.bins[0], data.bins[0]);
}
