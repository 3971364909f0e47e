mod common;

use std::time::Instant;

use common::{prepared, synthetic};
use gamlab::boost::{fit_boosted, BoostConfig, BoostMode};
use gamlab::data::Value;
use gamlab::trainer::{Algorithm, Scale};
use gamlab::{ShapeFunction, Trainer};

fn binned_values(shape: &ShapeFunction) -> &[f64] {
    match shape {
        ShapeFunction::Binned { values, .. } => values,
        _ => panic!("boosted shapes are binned"),
    }
}

fn value_range(shape: &ShapeFunction) -> f64 {
    let v = binned_values(shape);
    // The reserved missing bin is never populated here.
    let v = &v[..v.len() - 1];
    v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
}

fn desk(mode: BoostMode) -> BoostConfig {
    BoostConfig {
        mode,
        ..Default::default()
    }
}

#[test]
fn pure_noise_gives_near_flat_shapes() {
    let data = prepared(synthetic(3000, 3, 1, |_| -0.8), 1, 255);
    let start = Instant::now();
    let model = Trainer::preset(Algorithm::Ebm, Scale::Desk).fit(&data, 0).unwrap();
    eprintln!("ebm desk on 3000x3: {:?}", start.elapsed());
    for f in &model.features {
        let max = binned_values(&f.shape).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 0.1, "{}: {max}", f.name);
    }
}

#[test]
fn cyclic_recovers_a_step() {
    let data = prepared(synthetic(3000, 2, 2, |x| if x[0] > 0.0 { 40.0 } else { -40.0 }), 2, 64);
    let (model, traces) = fit_boosted(&data, &desk(BoostMode::Cyclic)).unwrap();
    let values = binned_values(&model.features[0].shape);
    let gamlab::model::BinLayout::Numeric { edges } = (match &model.features[0].shape {
        ShapeFunction::Binned { layout, .. } => layout.clone(),
        _ => unreachable!(),
    }) else {
        unreachable!()
    };
    // Largest jump between adjacent value bins sits at the edge nearest 0.
    let jumps: Vec<f64> = values[..values.len() - 1].windows(2).map(|w| w[1] - w[0]).collect();
    let biggest = (0..jumps.len()).max_by(|&a, &b| jumps[a].total_cmp(&jumps[b])).unwrap();
    let nearest = (0..edges.len())
        .min_by(|&a, &b| edges[a].abs().total_cmp(&edges[b].abs()))
        .unwrap();
    assert!(
        biggest.abs_diff(nearest) <= 1,
        "jump at edge {biggest}, zero near {nearest}"
    );
    // Near-flat on the data: mean |f1| is small next to mean |f0|.
    let mean_abs = |j: usize| {
        let rows = &data.split.train;
        rows.iter()
            .map(|&r| model.features[j].shape.eval(data.value(j, r)).abs())
            .sum::<f64>()
            / rows.len() as f64
    };
    assert!(mean_abs(1) < 0.1 * mean_abs(0), "{} vs {}", mean_abs(1), mean_abs(0));
    // Cyclic updates every feature every cycle.
    for t in &traces {
        assert!(t.updates.iter().all(|&u| u == t.updates[0]));
    }
}

#[test]
fn best_first_concentrates_on_the_signal() {
    let data = prepared(synthetic(4000, 10, 3, |x| if x[0] > 0.0 { 2.0 } else { -2.0 }), 3, 32);
    let cfg = BoostConfig {
        outer_bags: 2,
        inner_bags: 2,
        ..desk(BoostMode::BestFirst)
    };
    let (model, traces) = fit_boosted(&data, &cfg).unwrap();
    for t in &traces {
        let signal = t.best_updates[0];
        assert!(
            t.best_updates[1..].iter().all(|&u| 3 * u < signal),
            "{:?}",
            t.best_updates
        );
    }
    // Nearly all of the fitted effect sits on the signal feature.
    let rows = &data.split.train;
    let magnitude: Vec<f64> = model
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| rows.iter().map(|&r| f.shape.eval(data.value(j, r)).abs()).sum::<f64>())
        .collect();
    let share = magnitude[0] / magnitude.iter().sum::<f64>();
    assert!(share >= 0.9, "signal share {share}");
}

#[test]
fn single_feature_best_first_equals_cyclic() {
    let data = prepared(synthetic(800, 1, 4, |x| 2.0 * x[0]), 4, 32);
    let cfg = BoostConfig {
        outer_bags: 2,
        inner_bags: 3,
        max_rounds: 300,
        ..Default::default()
    };
    let (a, _) = fit_boosted(
        &data,
        &BoostConfig {
            mode: BoostMode::Cyclic,
            ..cfg.clone()
        },
    )
    .unwrap();
    let (b, _) = fit_boosted(
        &data,
        &BoostConfig {
            mode: BoostMode::BestFirst,
            ..cfg
        },
    )
    .unwrap();
    assert_eq!(a.intercept, b.intercept);
    assert_eq!(a.features, b.features);
}

#[test]
fn newton_finds_the_step_feature() {
    let data = prepared(synthetic(2000, 3, 5, |x| if x[1] > 0.0 { 6.0 } else { -6.0 }), 5, 64);
    let model = Trainer::preset(Algorithm::Xgb, Scale::Desk).fit(&data, 0).unwrap();
    let ranges: Vec<f64> = model.features.iter().map(|f| value_range(&f.shape)).collect();
    assert!(ranges[1] > 5.0 * ranges[0].max(ranges[2]), "{ranges:?}");
}

#[test]
fn one_feature_mode_samples_features_uniformly() {
    let data = prepared(synthetic(500, 5, 6, |x| x[0]), 6, 16);
    let cfg = BoostConfig {
        mode: BoostMode::NewtonOneFeature,
        outer_bags: 1,
        max_rounds: 1000,
        patience: 5000,
        learning_rate: 0.01,
        leaves_per_stump: 2,
        ..Default::default()
    };
    let (_, traces) = fit_boosted(&data, &cfg).unwrap();
    assert_eq!(traces[0].rounds, 1000);
    for &u in &traces[0].updates {
        assert!((140..=260).contains(&u), "{:?}", traces[0].updates);
    }
}

#[test]
fn training_is_deterministic() {
    let data = prepared(synthetic(600, 3, 7, |x| x[0] - x[2]), 7, 32);
    for algo in [Algorithm::Ebm, Algorithm::EbmBf, Algorithm::Xgb, Algorithm::XgbL2] {
        let t = Trainer::preset(algo, Scale::Desk);
        let a = t.fit(&data, 3).unwrap();
        let b = t.fit(&data, 3).unwrap();
        assert_eq!(a, b, "{algo}");
        let c = t.fit(&data, 4).unwrap();
        assert_ne!(a.features, c.features, "{algo}: seed had no effect");
    }
}

#[test]
fn one_hot_newton_splits_a_single_category() {
    use gamlab::data::{make_split, Column, DEFAULT_FRACTIONS};
    use gamlab::{BinnedDataset, RawDataset};
    use std::sync::Arc;
    // Only category "b" (the middle one in first-appearance order) matters:
    // a contiguous two-leaf split on label codes cannot isolate it, a
    // one-vs-rest split can.
    let cats = ["a", "b", "c"];
    let n = 1500;
    let tokens: Vec<Option<String>> = (0..n).map(|i| Some(cats[i % 3].to_string())).collect();
    let labels: Vec<f64> = (0..n).map(|i| f64::from(i % 3 == 1 && i % 7 != 0)).collect();
    let raw = RawDataset::new("cat", "y", vec![Column::categorical("c", tokens)], labels).unwrap();
    let split = make_split(&raw, 0, DEFAULT_FRACTIONS).unwrap();
    let data = BinnedDataset::prepare(Arc::new(raw), split, 255).unwrap();
    let model = Trainer::preset(Algorithm::Xgb, Scale::Desk).fit(&data, 0).unwrap();
    let f = |c: &str| model.shape_value(0, Value::Cat(c));
    assert!(f("b") > f("a") + 2.0 && f("b") > f("c") + 2.0);
    assert!((f("a") - f("c")).abs() < 0.5);
}
