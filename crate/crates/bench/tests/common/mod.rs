#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gamlab::model::logistic;
use gamlab::seed;
use rand::Rng;

/// CSV with a numeric, a boolean, a categorical and a group column, some
/// missing values, and a yes/no label.
pub fn write_dataset(dir: &Path, n: usize, seed_value: u64) -> PathBuf {
    let mut rng = seed::rng(seed_value);
    let mut text = String::from("x,flag,color,group,y\n");
    for _ in 0..n {
        let x: f64 = rng.random_range(-2.0..2.0);
        let flag = rng.random_bool(0.4);
        let color = ["red", "green", "blue"][rng.random_range(0..3)];
        let group = if rng.random_bool(0.5) { "A" } else { "B" };
        let logit = 1.5 * x + if flag { 1.0 } else { -0.5 } + if color == "red" { 0.7 } else { 0.0 };
        let y = if rng.random::<f64>() < logistic(logit) {
            "yes"
        } else {
            "no"
        };
        let x = if rng.random_bool(0.03) {
            String::new()
        } else {
            format!("{x:.3}")
        };
        writeln!(text, "{x},{},{color},{group},{y}", u8::from(flag)).unwrap();
    }
    let path = dir.join("toy.csv");
    std::fs::write(&path, text).unwrap();
    path
}

/// Config over the toy dataset with the given algorithms, seeds and tasks.
pub fn write_config(dir: &Path, algorithms: &[&str], seeds: &[u64], tasks: &[&str]) -> PathBuf {
    write_dataset(dir, 600, 3);
    let cfg = serde_json::json!({
        "datasets": [{ "name": "toy", "path": "toy.csv", "label": "y", "groups": ["group"] }],
        "algorithms": algorithms.iter().map(|a| serde_json::json!({ "id": a })).collect::<Vec<_>>(),
        "seeds": seeds,
        "tasks": tasks,
        "output": "out",
        "max_bins": 32,
        "fairness": { "drop": ["color"] },
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}
