use std::path::PathBuf;

use gamlab::data::{load_csv, ColumnKind, LoadOptions};
use gamlab::{AdditiveModel, Value};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn csv_types_missing_and_labels() {
    let raw = load_csv(&fixture("tiny.csv"), &LoadOptions::new("outcome")).unwrap();
    assert_eq!(raw.name, "tiny");
    assert_eq!(raw.labels, [0.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
    let age = raw.column("age").unwrap();
    assert_eq!(age.kind(), ColumnKind::Numeric);
    assert_eq!(age.value(3), Value::Missing);
    assert_eq!(raw.column("color").unwrap().kind(), ColumnKind::Categorical);
    let income = raw.column("income").unwrap();
    assert_eq!(income.value(1), Value::Missing);
    assert_eq!(income.value(5), Value::Missing);
    assert_eq!(income.value(0), Value::Num(1200.5));
}

#[test]
fn csv_rejects_missing_label_column() {
    assert!(load_csv(&fixture("tiny.csv"), &LoadOptions::new("target")).is_err());
}

#[test]
fn hand_written_model_predicts_by_hand() {
    let model = AdditiveModel::load(&fixture("model_v1.json")).unwrap();
    let raw = load_csv(&fixture("tiny.csv"), &LoadOptions::new("outcome")).unwrap();
    let rows: Vec<usize> = (0..raw.n_rows()).collect();
    let scores = model.scores(&raw, &rows).unwrap();
    // age bins (-inf,30) [30,45) [45,inf) missing; red/blue/unknown;
    // income linear from (1000,-2) to (3000,2), flat outside.
    let want = [
        -0.5 - 1.0 + 0.5 + (-2.0 + 4.0 * 200.5 / 2000.0),
        -0.5 + 0.0 - 0.5 + 0.1,
        -0.5 + 0.0 + 0.5 + 2.0,
        -0.5 + 0.25 + 0.0 - 2.0,
        -0.5 + 1.0 - 0.5 + 2.0,
        -0.5 - 1.0 + 0.5 + 0.1,
    ];
    for (g, w) in scores.iter().zip(want) {
        assert!((g - w).abs() < 1e-12, "{g} vs {w}");
    }
    let back = AdditiveModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back, model);
}

#[test]
fn malformed_models_are_rejected() {
    let good = std::fs::read_to_string(fixture("model_v1.json")).unwrap();
    for bad in [
        good.replace("\"version\": 1", "\"version\": 2"),
        good.replace("[30.0, 45.0]", "[45.0, 30.0]"),
        good.replace("[0.5, -0.5, 0.0]", "[0.5, -0.5]"),
        good.replace("\"seed\": 7", "\"seed\": 7, \"extra\": 1"),
        good.replace("[-2.0, 2.0]", "[-2.0]"),
    ] {
        assert!(AdditiveModel::from_json(&bad).is_err(), "{bad}");
    }
}
