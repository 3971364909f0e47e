mod common;

use std::sync::Arc;

use common::{read_csv, write_dataset};
use gamlab::data::{load_csv, LoadOptions, Value};
use gamlab::trainer::{Algorithm, Scale};
use gamlab::Trainer;
use gamlab_bench::plot::{export_overlay, export_shapes, prepare};
use gamlab_bench::runner::prepare_dataset;

fn toy() -> (tempfile::TempDir, gamlab::BinnedDataset) {
    let dir = tempfile::tempdir().unwrap();
    let path = write_dataset(dir.path(), 800, 11);
    let raw = Arc::new(load_csv(&path, &LoadOptions::new("y")).unwrap());
    let data = prepare_dataset(&raw, false, 0, 32).unwrap();
    (dir, data)
}

#[test]
fn boolean_feature_is_two_bars() {
    let (dir, data) = toy();
    let model = Trainer::preset(Algorithm::Lr, Scale::Desk).fit(&data, 0).unwrap();
    let out = dir.path().join("shapes");
    let files = export_shapes(&model, &data, &out).unwrap();
    assert_eq!(files.len(), 2 * data.n_features());

    let (header, rows) = read_csv(&out.join("flag.csv"));
    assert_eq!(header, ["bin", "lower", "upper", "x", "value", "density"]);
    assert_eq!(rows.len(), 2);
    let svg = std::fs::read_to_string(out.join("flag.svg")).unwrap();
    assert_eq!(svg.matches("class=\"bar\"").count(), 2);
    assert!(svg.contains("log-odds"));

    // Missing values in training add the reserved bin as the last row.
    let (_, rows) = read_csv(&out.join("x.csv"));
    assert_eq!(rows.last().unwrap()[3], "missing");
    let svg = std::fs::read_to_string(out.join("x.svg")).unwrap();
    assert!(svg.contains("class=\"series\"") && svg.contains("class=\"missing\""));

    let (header, rows) = read_csv(&out.join("color.csv"));
    assert_eq!(header[1], "category");
    let cats: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(cats.len(), 3);
}

#[test]
fn csv_values_round_trip_exactly() {
    let (dir, data) = toy();
    let model = Trainer::preset(Algorithm::Spline, Scale::Desk).fit(&data, 0).unwrap();
    let shown = prepare(&model, &data).unwrap();
    let out = dir.path().join("shapes");
    export_shapes(&model, &data, &out).unwrap();
    for name in ["x", "flag"] {
        let j = shown.feature_index(name).unwrap();
        let (_, rows) = read_csv(&out.join(format!("{name}.csv")));
        for r in rows.iter().filter(|r| r[3] != "missing") {
            let x: f64 = r[3].parse().unwrap();
            let v: f64 = r[4].parse().unwrap();
            assert_eq!(v, shown.shape_value(j, Value::Num(x)), "{name} at {x}");
        }
    }
    let j = shown.feature_index("color").unwrap();
    let (_, rows) = read_csv(&out.join("color.csv"));
    for r in &rows {
        let v: f64 = r[2].parse().unwrap();
        assert_eq!(v, shown.shape_value(j, Value::Cat(&r[1])));
    }
}

#[test]
fn overlay_draws_one_series_per_model() {
    let (dir, data) = toy();
    let a = Trainer::preset(Algorithm::Lr, Scale::Desk).fit(&data, 0).unwrap();
    let b = Trainer::preset(Algorithm::Flam, Scale::Desk).fit(&data, 0).unwrap();
    let out = dir.path().join("overlay");
    export_overlay(&[("lr", &a), ("flam", &b)], &data, &out).unwrap();
    let (header, _) = read_csv(&out.join("x.csv"));
    assert_eq!(header, ["bin", "lower", "upper", "x", "lr", "flam", "density"]);
    let svg = std::fs::read_to_string(out.join("x.svg")).unwrap();
    assert_eq!(svg.matches("class=\"series\"").count(), 2);
    assert_eq!(svg.matches("class=\"legend\"").count(), 2);
}
