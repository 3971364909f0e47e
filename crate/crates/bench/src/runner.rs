//! Grid execution. Expensive work is split into cells (one trained model,
//! one bias/variance estimate, one fidelity generator), each written to
//! its own file and recorded in the manifest with a key over its inputs.
//! Tables are then rebuilt from the cell outputs on every run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use gamlab::data::{make_split, DEFAULT_FRACTIONS};
use gamlab::metrics::{ablate_and_retrain, bias_variance, generator_distances};
use gamlab::{seed, AdditiveModel, BinnedDataset, RawDataset, Trainer};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{DatasetEntry, ExperimentConfig, Task};
use crate::error::{BenchError, Result};
use crate::manifest::{hash_bytes, hash_file, write_atomic, CellRecord, CellStatus, RunManifest, SeedRecord};
use crate::tables;

/// Environment variable bounding the worker pool.
pub const THREADS_ENV: &str = "GAMLAB_THREADS";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's task list.
    pub tasks: Option<Vec<Task>>,
    /// Overrides the config's fairness drop list.
    pub drop: Option<Vec<String>>,
    /// Worker count; falls back to `GAMLAB_THREADS`, then all cores.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
}

pub(crate) struct LoadedDataset {
    pub entry: DatasetEntry,
    pub raw: Arc<RawDataset>,
    /// Digest of the CSV, the schema file and the load options.
    pub key: String,
}

pub(crate) struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub tasks: BTreeSet<Task>,
    pub drop: Vec<String>,
    pub out: PathBuf,
    pub datasets: Vec<LoadedDataset>,
    pub trainers: Vec<(String, Trainer)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct FidelityCell {
    pub generator: String,
    pub candidates: Vec<String>,
    pub distances: Vec<f64>,
}

enum CellKind {
    Train { ds: usize, alg: usize, seed: u64 },
    Ablate { ds: usize, feature: String, seed: u64 },
    Biasvar { ds: usize, alg: usize },
    Fidelity { ds: usize, generator: usize },
}

struct Cell {
    id: String,
    task: &'static str,
    key: String,
    file: String,
    kind: CellKind,
    seeds: Vec<SeedRecord>,
}

/// Ablations run only where fairness is reported and the feature exists.
pub(crate) fn ablates(d: &LoadedDataset, feature: &str) -> bool {
    !d.entry.groups.is_empty() && d.raw.column_index(feature).is_some()
}

pub fn model_path(dataset: &str, model: &str, seed: u64) -> String {
    format!("models/{dataset}/{model}/seed-{seed}.json")
}

pub fn ablated_id(reference: &str, feature: &str) -> String {
    format!("{reference}-without-{feature}")
}

/// Split with `seed`, optionally mean-impute on the training rows, and bin.
pub fn prepare_dataset(raw: &Arc<RawDataset>, impute: bool, seed: u64, max_bins: usize) -> Result<BinnedDataset> {
    let split = make_split(raw, seed, DEFAULT_FRACTIONS)?;
    let raw = if impute {
        Arc::new(raw.impute_mean(&split.train))
    } else {
        raw.clone()
    };
    Ok(BinnedDataset::prepare(raw, split, max_bins)?)
}

pub fn load_model(path: &Path) -> Result<AdditiveModel> {
    Ok(AdditiveModel::load(path)?)
}

fn key_of(value: serde_json::Value) -> String {
    hash_bytes(serde_json::to_string(&value).expect("json").as_bytes())
}

fn worker_count(opts: &RunOptions) -> Result<usize> {
    if let Some(n) = opts.threads {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| BenchError::Config(format!("{THREADS_ENV}={v} is not a count"))),
        Err(_) => Ok(0),
    }
}

fn load_datasets(cfg: &ExperimentConfig) -> Result<Vec<LoadedDataset>> {
    cfg.datasets
        .iter()
        .map(|entry| {
            let raw = entry
                .load()
                .map_err(|e| BenchError::Config(format!("dataset `{}`: {e}", entry.name)))?;
            let mut stripped = entry.clone();
            stripped.path = PathBuf::new();
            stripped.schema = None;
            let schema_hash = match &entry.schema {
                Some(p) => hash_file(p)?,
                None => String::new(),
            };
            let key = key_of(json!({
                "csv": hash_file(&entry.path)?,
                "schema": schema_hash,
                "options": stripped,
            }));
            Ok(LoadedDataset {
                entry: entry.clone(),
                raw: Arc::new(raw),
                key,
            })
        })
        .collect()
}

impl Context<'_> {
    fn train_seeds(&self) -> &[u64] {
        let all = [Task::Accuracy, Task::Density, Task::Rankgap];
        if all.iter().any(|t| self.tasks.contains(t)) {
            &self.cfg.seeds
        } else if self.tasks.contains(&Task::Plots) || self.tasks.contains(&Task::Fairness) {
            &self.cfg.seeds[..1]
        } else {
            &[]
        }
    }

    fn trainer_index(&self, id: &str) -> usize {
        self.trainers.iter().position(|(t, _)| t == id).expect("validated id")
    }

    fn cells(&self) -> Vec<Cell> {
        let cfg = self.cfg;
        let s0 = cfg.seeds[0];
        let mut cells = Vec::new();
        for (di, d) in self.datasets.iter().enumerate() {
            let name = &d.entry.name;
            for &s in self.train_seeds() {
                for (ai, (id, t)) in self.trainers.iter().enumerate() {
                    let cell_id = format!("train/{name}/{id}/seed-{s}");
                    cells.push(Cell {
                        key: key_of(json!({
                            "kind": "train", "data": d.key, "trainer": t.config,
                            "max_bins": t.max_bins, "seed": s,
                        })),
                        file: model_path(name, id, s),
                        task: "train",
                        kind: CellKind::Train {
                            ds: di,
                            alg: ai,
                            seed: s,
                        },
                        seeds: vec![SeedRecord {
                            cell: cell_id.clone(),
                            split_seed: s,
                            train_seed: s,
                        }],
                        id: cell_id,
                    });
                }
            }
            if self.tasks.contains(&Task::Fairness) {
                let (ref_id, ref_t) = &self.trainers[self.trainer_index(&cfg.fairness_reference().id)];
                for feature in self.drop.iter().filter(|f| ablates(d, f)) {
                    let model = ablated_id(ref_id, feature);
                    let cell_id = format!("ablate/{name}/{model}/seed-{s0}");
                    cells.push(Cell {
                        key: key_of(json!({
                            "kind": "ablate", "data": d.key, "trainer": ref_t.config,
                            "max_bins": ref_t.max_bins, "seed": s0, "drop": feature,
                        })),
                        file: model_path(name, &model, s0),
                        task: "fairness",
                        kind: CellKind::Ablate {
                            ds: di,
                            feature: feature.clone(),
                            seed: s0,
                        },
                        seeds: vec![SeedRecord {
                            cell: cell_id.clone(),
                            split_seed: s0,
                            train_seed: s0,
                        }],
                        id: cell_id,
                    });
                }
            }
            if self.tasks.contains(&Task::Biasvar) {
                for (ai, (id, t)) in self.trainers.iter().enumerate() {
                    let cell_id = format!("biasvar/{name}/{id}");
                    cells.push(Cell {
                        key: key_of(json!({
                            "kind": "biasvar", "data": d.key, "trainer": t.config,
                            "max_bins": t.max_bins, "protocol": cfg.biasvar,
                        })),
                        file: format!("cells/biasvar/{name}/{id}.json"),
                        task: "biasvar",
                        kind: CellKind::Biasvar { ds: di, alg: ai },
                        seeds: vec![SeedRecord {
                            cell: cell_id.clone(),
                            split_seed: cfg.biasvar.seed,
                            train_seed: cfg.biasvar.seed,
                        }],
                        id: cell_id,
                    });
                }
            }
            if self.tasks.contains(&Task::Fidelity) {
                let candidates: Vec<_> = cfg
                    .fidelity_candidates()
                    .iter()
                    .map(|a| {
                        let (id, t) = &self.trainers[self.trainer_index(&a.id)];
                        json!({"id": id, "trainer": t.config, "max_bins": t.max_bins})
                    })
                    .collect();
                for (gi, g) in cfg.fidelity_generators().iter().enumerate() {
                    let ai = self.trainer_index(&g.id);
                    let (id, t) = &self.trainers[ai];
                    let cell_id = format!("fidelity/{name}/{id}");
                    cells.push(Cell {
                        key: key_of(json!({
                            "kind": "fidelity", "data": d.key, "generator": t.config,
                            "index": gi, "max_bins": cfg.max_bins, "candidates": candidates,
                            "seed": s0, "labels": cfg.fidelity.label_mode,
                        })),
                        file: format!("cells/fidelity/{name}/{id}.json"),
                        task: "fidelity",
                        kind: CellKind::Fidelity { ds: di, generator: gi },
                        seeds: vec![SeedRecord {
                            cell: cell_id.clone(),
                            split_seed: s0,
                            train_seed: seed::derive(s0, gi as u64),
                        }],
                        id: cell_id,
                    });
                }
            }
        }
        cells
    }

    fn execute(&self, kind: &CellKind) -> Result<Vec<u8>> {
        let cfg = self.cfg;
        let prepare = |ds: usize, s: u64| {
            let d = &self.datasets[ds];
            prepare_dataset(&d.raw, d.entry.impute_mean, s, cfg.max_bins)
        };
        match kind {
            CellKind::Train { ds, alg, seed } => {
                let data = prepare(*ds, *seed)?;
                let model = self.trainers[*alg].1.fit(&data, *seed)?;
                Ok(model.to_json()?.into_bytes())
            }
            CellKind::Ablate { ds, feature, seed } => {
                let data = prepare(*ds, *seed)?;
                let (_, t) = &self.trainers[self.trainer_index(&cfg.fairness_reference().id)];
                let model = ablate_and_retrain(t, &data, feature, *seed)?;
                Ok(model.to_json()?.into_bytes())
            }
            CellKind::Biasvar { ds, alg } => {
                let d = &self.datasets[*ds];
                let all: Vec<usize> = (0..d.raw.n_rows()).collect();
                let raw = if d.entry.impute_mean {
                    Arc::new(d.raw.impute_mean(&all))
                } else {
                    d.raw.clone()
                };
                let t = &self.trainers[*alg].1;
                let est = bias_variance(&raw.labels, &cfg.biasvar, |train, test, s| {
                    t.fit_rows(raw.clone(), train, s)?.probabilities(&raw, test)
                })?;
                Ok(serde_json::to_vec_pretty(&est).expect("estimate serializes"))
            }
            CellKind::Fidelity { ds, generator } => {
                let data = prepare(*ds, cfg.seeds[0])?;
                let gens = cfg.fidelity_generators();
                let g = &self.trainers[self.trainer_index(&gens[*generator].id)];
                let cands = cfg.fidelity_candidates();
                let trainers: Vec<Trainer> = cands
                    .iter()
                    .map(|a| self.trainers[self.trainer_index(&a.id)].1.clone())
                    .collect();
                let distances = generator_distances(
                    &data,
                    &g.1,
                    *generator,
                    &trainers,
                    cfg.seeds[0],
                    cfg.fidelity.label_mode,
                )?;
                let cell = FidelityCell {
                    generator: g.0.clone(),
                    candidates: cands.iter().map(|a| a.id.clone()).collect(),
                    distances,
                };
                Ok(serde_json::to_vec_pretty(&cell).expect("cell serializes"))
            }
        }
    }
}

/// Execute `cfg`: compute (or reuse) every cell, rebuild the tables, and
/// write the manifest. Cell failures are recorded and counted, not raised.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    let tasks: BTreeSet<Task> = opts
        .tasks
        .clone()
        .unwrap_or_else(|| cfg.tasks.clone())
        .into_iter()
        .collect();
    if tasks.contains(&Task::Rankgap) && !(tasks.contains(&Task::Accuracy) && tasks.contains(&Task::Fidelity)) {
        return Err(BenchError::Config(
            "rankgap needs the accuracy and fidelity tasks".into(),
        ));
    }
    let threads = worker_count(opts)?;
    let ctx = Context {
        cfg,
        tasks,
        drop: opts.drop.clone().unwrap_or_else(|| cfg.fairness.drop.clone()),
        out: cfg.output.clone(),
        datasets: load_datasets(cfg)?,
        trainers: cfg
            .algorithms
            .iter()
            .map(|a| Ok((a.id.clone(), cfg.trainer(a)?)))
            .collect::<Result<_>>()?,
    };
    std::fs::create_dir_all(&ctx.out).map_err(|e| BenchError::io(&ctx.out, e))?;
    let previous = RunManifest::load(&ctx.out)?;
    let manifest = Mutex::new(RunManifest::new(cfg.digest()));

    let cells = ctx.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BenchError::Config(format!("worker pool: {e}")))?;
    let reused: Vec<bool> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let prior = previous.as_ref().and_then(|m| m.cell(&cell.id));
                if let Some(prior) = prior.filter(|p| p.reusable(&cell.key, &ctx.out)) {
                    let mut m = manifest.lock().expect("manifest lock");
                    m.record(prior.clone());
                    m.seeds.extend(cell.seeds.iter().cloned());
                    return true;
                }
                let start = Instant::now();
                let result = ctx.execute(&cell.kind).and_then(|bytes| {
                    write_atomic(&ctx.out.join(&cell.file), &bytes)?;
                    Ok(hash_bytes(&bytes))
                });
                let wall_ms = start.elapsed().as_millis() as u64;
                let record = match result {
                    Ok(hash) => CellRecord {
                        id: cell.id.clone(),
                        task: cell.task.to_string(),
                        key: cell.key.clone(),
                        status: CellStatus::Ok,
                        error: None,
                        wall_ms,
                        files: [(cell.file.clone(), hash)].into_iter().collect(),
                    },
                    Err(e) => CellRecord {
                        id: cell.id.clone(),
                        task: cell.task.to_string(),
                        key: cell.key.clone(),
                        status: CellStatus::Failed,
                        error: Some(e.to_string()),
                        wall_ms,
                        files: Default::default(),
                    },
                };
                let mut m = manifest.lock().expect("manifest lock");
                m.record(record);
                m.seeds.extend(cell.seeds.iter().cloned());
                m.seeds.sort();
                // A partial manifest lets an interrupted run resume.
                let _ = m.save(&ctx.out);
                false
            })
            .collect()
    });

    let mut manifest = manifest.into_inner().expect("manifest lock");
    manifest.seeds.sort();
    tables::build(&ctx, &mut manifest)?;
    manifest.save(&ctx.out)?;
    let skipped = reused.iter().filter(|&&r| r).count();
    Ok(RunOutcome {
        failed: manifest.failed_cells(),
        computed: cells.len() - skipped,
        skipped,
        manifest,
    })
}
