mod common;

use std::process::Command;

use common::{write_config, write_dataset};

fn gamlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gamlab")).args(args).output().unwrap()
}

#[test]
fn train_eval_and_plot_from_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &["lr"], &[0], &["accuracy"]);
    let cfg = cfg.to_str().unwrap();
    let model = dir.path().join("m.json");
    let model = model.to_str().unwrap();
    let out = gamlab(&[
        "train",
        "--config",
        cfg,
        "--dataset",
        "toy",
        "--algo",
        "lr",
        "--seed",
        "1",
        "--out",
        model,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = gamlab(&[
        "eval",
        "--model",
        model,
        "--config",
        cfg,
        "--dataset",
        "toy",
        "--seed",
        "1",
        "--split",
        "test",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["auc"].as_f64().unwrap() > 0.6);

    let out = gamlab(&[
        "density",
        "--model",
        model,
        "--config",
        cfg,
        "--dataset",
        "toy",
        "--seed",
        "1",
    ]);
    assert!(out.status.success());
    let curve: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(curve["steps"].as_array().unwrap().len(), 5);

    let out = gamlab(&[
        "fairness",
        "--model",
        model,
        "--config",
        cfg,
        "--dataset",
        "toy",
        "--seed",
        "1",
        "--group",
        "group",
    ]);
    assert!(out.status.success());

    let plots = dir.path().join("plots");
    let out = gamlab(&[
        "plot",
        "--model",
        model,
        "--overlay",
        model,
        "--config",
        cfg,
        "--dataset",
        "toy",
        "--seed",
        "1",
        "--out",
        plots.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(plots.join("flag.svg").exists());
}

#[test]
fn csv_path_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_dataset(dir.path(), 400, 5);
    let model = dir.path().join("m.json");
    let out = gamlab(&[
        "train",
        "--dataset",
        csv.to_str().unwrap(),
        "--label",
        "y",
        "--algo",
        "mlr",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = gamlab(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "missing --label is a config error");
}

#[test]
fn run_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &["lr", "mlr"], &[0], &["accuracy"]);
    let out = gamlab(&["run", "--config", cfg.to_str().unwrap(), "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = gamlab(&["summarize", "--run", dir.path().join("out").to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("algorithm,average_auc,average_rank,normalized_auc\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"datasets": [], "algorithms": []}"#).unwrap();
    assert_eq!(
        gamlab(&["run", "--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(gamlab(&["run", "--config", "/nonexistent.json"]).status.code(), Some(2));

    let cfg = write_config(dir.path(), &["lr"], &[0], &["accuracy", "biasvar"]);
    let mut value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    value["biasvar"] = serde_json::json!({
        "rounds": 1, "reps": 1, "subsample": 2.0, "test_fraction": 0.15, "min_rounds": 1, "loss": "log-loss", "seed": 0
    });
    std::fs::write(&cfg, value.to_string()).unwrap();
    let out = gamlab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    let out = gamlab(&["defaults", "--algo", "ebm-bf", "--scale", "paper"]);
    assert!(out.status.success());
    let preset: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(preset["algorithm"], "ebm-bf");
    assert_eq!(preset["outer_bags"], 100);
    assert_eq!(gamlab(&["defaults", "--algo", "nope"]).status.code(), Some(2));
}
