//! Tables and plots rebuilt from cell outputs. Everything written here is a
//! pure function of the cells, so reruns produce identical bytes.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use gamlab::metrics::{
    auc, cross_entropy, feature_density, rank_gap, subgroup_report, BiasVarianceEstimate, FidelityTable,
};
use gamlab::{AdditiveModel, BinnedDataset};

use crate::config::Task;
use crate::error::{BenchError, Result};
use crate::manifest::{hash_bytes, hash_file, write_atomic, CellStatus, RunManifest};
use crate::plot::{export_overlay, export_shapes};
use crate::runner::{ablated_id, ablates, model_path, prepare_dataset, Context, FidelityCell};
use crate::summary::{mean_std, summarize};

/// Long rows, per-dataset per-algorithm (mean, std) of the first metric,
/// and whether every cell was present.
type SeedTable = (Vec<Vec<String>>, Vec<Vec<Option<(f64, f64)>>>, bool);

struct Builder<'a, 'c> {
    ctx: &'a Context<'c>,
    manifest: &'a RunManifest,
    artifacts: BTreeMap<String, String>,
    notes: Vec<String>,
    data: HashMap<(usize, u64), BinnedDataset>,
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(gamlab::Error::from)?;
    for r in rows {
        w.write_record(r).map_err(gamlab::Error::from)?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

fn num(x: f64) -> String {
    x.to_string()
}

fn pct(mean: f64, std: f64) -> String {
    format!("{:.1} ± {:.1}", 100.0 * mean, 100.0 * std)
}

impl Builder<'_, '_> {
    fn emit(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.ctx.out.join(rel), bytes)?;
        self.artifacts.insert(rel.to_string(), hash_bytes(bytes));
        Ok(())
    }

    fn emit_csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let bytes = csv_bytes(header, rows)?;
        self.emit(rel, &bytes)
    }

    fn record_files(&mut self, files: &[std::path::PathBuf]) -> Result<()> {
        for f in files {
            let rel = f
                .strip_prefix(&self.ctx.out)
                .unwrap_or(f)
                .to_string_lossy()
                .into_owned();
            self.artifacts.insert(rel, hash_file(f)?);
        }
        Ok(())
    }

    fn dataset(&mut self, ds: usize, seed: u64) -> Result<&BinnedDataset> {
        if !self.data.contains_key(&(ds, seed)) {
            let d = &self.ctx.datasets[ds];
            let data = prepare_dataset(&d.raw, d.entry.impute_mean, seed, self.ctx.cfg.max_bins)?;
            self.data.insert((ds, seed), data);
        }
        Ok(&self.data[&(ds, seed)])
    }

    fn cell_ok(&self, id: &str) -> bool {
        self.manifest.cell(id).is_some_and(|c| c.status == CellStatus::Ok)
    }

    fn read<T: serde::de::DeserializeOwned>(&self, id: &str, rel: &str) -> Result<Option<T>> {
        if !self.cell_ok(id) {
            return Ok(None);
        }
        let path = self.ctx.out.join(rel);
        let text = std::fs::read_to_string(&path).map_err(|e| BenchError::io(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
    }

    fn model(&self, ds: usize, id: &str, seed: u64, cell: &str) -> Result<Option<AdditiveModel>> {
        let name = &self.ctx.datasets[ds].entry.name;
        if !self.cell_ok(&format!("{cell}/{name}/{id}/seed-{seed}")) {
            return Ok(None);
        }
        Ok(Some(AdditiveModel::load(
            &self.ctx.out.join(model_path(name, id, seed)),
        )?))
    }

    /// Long table rows `dataset, algorithm, seed, metrics...` followed by
    /// mean and std rows per (dataset, algorithm). Returns per-dataset,
    /// per-algorithm means of the first metric.
    fn seed_table(
        &mut self,
        metric: &dyn Fn(&AdditiveModel, &BinnedDataset) -> Result<Vec<f64>>,
        width: usize,
    ) -> Result<SeedTable> {
        let ctx = self.ctx;
        let mut rows = Vec::new();
        let mut means = Vec::new();
        let mut complete = true;
        for ds in 0..ctx.datasets.len() {
            let name = ctx.datasets[ds].entry.name.clone();
            let mut per_alg = Vec::new();
            for (id, _) in &ctx.trainers {
                let mut values: Vec<Vec<f64>> = Vec::new();
                for &s in &ctx.cfg.seeds {
                    let Some(model) = self.model(ds, id, s, "train")? else {
                        complete = false;
                        continue;
                    };
                    let v = metric(&model, self.dataset(ds, s)?)?;
                    rows.push(
                        [name.clone(), id.clone(), s.to_string()]
                            .into_iter()
                            .chain(v.iter().map(|&x| num(x)))
                            .collect(),
                    );
                    values.push(v);
                }
                if values.is_empty() {
                    per_alg.push(None);
                    continue;
                }
                let stats: Vec<(f64, f64)> = (0..width)
                    .map(|k| mean_std(&values.iter().map(|v| v[k]).collect::<Vec<_>>()))
                    .collect();
                for (label, pick) in [("mean", 0usize), ("std", 1)] {
                    rows.push(
                        [name.clone(), id.clone(), label.to_string()]
                            .into_iter()
                            .chain(stats.iter().map(|s| num(if pick == 0 { s.0 } else { s.1 })))
                            .collect(),
                    );
                }
                per_alg.push(Some(stats[0]));
            }
            means.push(per_alg);
        }
        Ok((rows, means, complete))
    }

    fn wide(
        &self,
        means: &[Vec<Option<(f64, f64)>>],
        cell: &dyn Fn(f64, f64) -> String,
    ) -> (Vec<String>, Vec<Vec<String>>) {
        let ctx = self.ctx;
        let header = std::iter::once("dataset".to_string())
            .chain(ctx.trainers.iter().map(|(id, _)| id.clone()))
            .collect();
        let rows = means
            .iter()
            .enumerate()
            .map(|(ds, row)| {
                std::iter::once(ctx.datasets[ds].entry.name.clone())
                    .chain(row.iter().map(|c| c.map(|(m, s)| cell(m, s)).unwrap_or_default()))
                    .collect()
            })
            .collect();
        (header, rows)
    }

    fn accuracy(&mut self) -> Result<(bool, Vec<Vec<Option<f64>>>)> {
        let metric = |m: &AdditiveModel, d: &BinnedDataset| -> Result<Vec<f64>> {
            let test = &d.split.test;
            let p = m.probabilities(&d.raw, test)?;
            let t: Vec<f64> = test.iter().map(|&r| d.labels()[r]).collect();
            Ok(vec![auc(&p, &t)?, cross_entropy(&p, &t)])
        };
        let (rows, means, complete) = self.seed_table(&metric, 2)?;
        self.emit_csv(
            "tables/accuracy.csv",
            &["dataset", "algorithm", "seed", "auc", "logloss"],
            &rows,
        )?;
        let (header, wide) = self.wide(&means, &pct);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        self.emit_csv("tables/accuracy_table.csv", &header, &wide)?;

        let auc_means: Vec<Vec<Option<f64>>> = means
            .iter()
            .map(|r| r.iter().map(|c| c.map(|x| x.0)).collect())
            .collect();
        let names: Vec<String> = self.ctx.datasets.iter().map(|d| d.entry.name.clone()).collect();
        let algs: Vec<String> = self.ctx.trainers.iter().map(|(id, _)| id.clone()).collect();
        let summary = summarize(&names, &algs, &auc_means);
        let rows: Vec<Vec<String>> = summary
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.algorithm.clone(),
                    num(r.average_auc),
                    num(r.average_rank),
                    num(r.normalized_auc),
                ]
            })
            .collect();
        self.emit_csv(
            "tables/summary.csv",
            &["algorithm", "average_auc", "average_rank", "normalized_auc"],
            &rows,
        )?;
        self.notes.extend(summary.notes);
        Ok((complete, auc_means))
    }

    fn density(&mut self) -> Result<bool> {
        let metric = |m: &AdditiveModel, d: &BinnedDataset| -> Result<Vec<f64>> {
            let c = feature_density(m, d)?;
            Ok(vec![c.score, f64::from(u8::from(c.degenerate))])
        };
        let (rows, means, complete) = self.seed_table(&metric, 2)?;
        self.emit_csv(
            "tables/density.csv",
            &["dataset", "algorithm", "seed", "density", "degenerate"],
            &rows,
        )?;
        let (header, wide) = self.wide(&means, &|m, s| format!("{m:.1} ± {s:.1}"));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        self.emit_csv("tables/density_table.csv", &header, &wide)?;
        Ok(complete)
    }

    fn biasvar(&mut self) -> Result<bool> {
        let ctx = self.ctx;
        let mut rows = Vec::new();
        let mut complete = true;
        for d in &ctx.datasets {
            let name = &d.entry.name;
            for (id, _) in &ctx.trainers {
                let cell = format!("biasvar/{name}/{id}");
                let Some(est) = self.read::<BiasVarianceEstimate>(&cell, &format!("cells/{cell}.json"))? else {
                    complete = false;
                    continue;
                };
                rows.push(vec![
                    name.clone(),
                    id.clone(),
                    num(est.empirical_bias),
                    num(est.variance),
                    num(est.mean_loss),
                    est.rounds.len().to_string(),
                    est.discarded.len().to_string(),
                ]);
            }
        }
        self.emit_csv(
            "tables/biasvar.csv",
            &[
                "dataset",
                "algorithm",
                "empirical_bias",
                "variance",
                "mean_loss",
                "rounds",
                "discarded",
            ],
            &rows,
        )?;
        Ok(complete)
    }

    /// Per dataset, the worst-case score of every candidate.
    fn fidelity(&mut self) -> Result<(bool, Vec<Option<FidelityTable>>)> {
        let ctx = self.ctx;
        let gens = ctx.cfg.fidelity_generators();
        let candidates: Vec<String> = ctx.cfg.fidelity_candidates().iter().map(|a| a.id.clone()).collect();
        let mut complete = true;
        let mut tables = Vec::new();
        let mut rows = Vec::new();
        for d in &ctx.datasets {
            let name = &d.entry.name;
            let mut cells = Vec::new();
            for g in &gens {
                let id = format!("fidelity/{name}/{}", g.id);
                match self.read::<FidelityCell>(&id, &format!("cells/{id}.json"))? {
                    Some(c) => cells.push(c),
                    None => complete = false,
                }
            }
            if cells.is_empty() {
                self.notes.push(format!("{name}: no fidelity generator succeeded"));
                tables.push(None);
                continue;
            }
            let table = FidelityTable::from_distances(
                cells.iter().map(|c| c.generator.clone()).collect(),
                candidates.clone(),
                cells.into_iter().map(|c| c.distances).collect(),
            )?;
            for (g, gen) in table.generators.iter().enumerate() {
                if table.flagged[g] {
                    self.notes.push(format!("{name}/{gen}: all candidates equally distant"));
                }
                for (c, cand) in table.candidates.iter().enumerate() {
                    rows.push(vec![
                        name.clone(),
                        gen.clone(),
                        cand.clone(),
                        num(table.distances[g][c]),
                        num(table.scores[g][c]),
                    ]);
                }
            }
            tables.push(Some(table));
        }
        self.emit_csv(
            "tables/fidelity.csv",
            &["dataset", "generator", "candidate", "distance", "score"],
            &rows,
        )?;

        let header: Vec<&str> = std::iter::once("dataset")
            .chain(candidates.iter().map(String::as_str))
            .collect();
        let mut worst = Vec::new();
        let mut sums = vec![0.0; candidates.len()];
        let mut counted = 0usize;
        for (d, t) in ctx.datasets.iter().zip(&tables) {
            if let Some(t) = t {
                worst.push(
                    std::iter::once(d.entry.name.clone())
                        .chain(t.worst_case.iter().map(|&x| num(x)))
                        .collect(),
                );
                sums.iter_mut().zip(&t.worst_case).for_each(|(s, x)| *s += x);
                counted += 1;
            }
        }
        if counted > 0 {
            worst.push(
                std::iter::once("average".to_string())
                    .chain(sums.iter().map(|s| num(s / counted as f64)))
                    .collect(),
            );
        }
        self.emit_csv("tables/fidelity_worst.csv", &header, &worst)?;
        Ok((complete, tables))
    }

    fn rankgap(&mut self, auc_means: &[Vec<Option<f64>>], fidelity: &[Option<FidelityTable>]) -> Result<bool> {
        let ctx = self.ctx;
        let candidates: Vec<String> = ctx.cfg.fidelity_candidates().iter().map(|a| a.id.clone()).collect();
        let alg_index: Vec<usize> = candidates
            .iter()
            .map(|c| ctx.trainers.iter().position(|(id, _)| id == c).expect("validated"))
            .collect();
        let mut auc_table = Vec::new();
        let mut fid_table = Vec::new();
        for (ds, t) in fidelity.iter().enumerate() {
            let aucs: Option<Vec<f64>> = alg_index.iter().map(|&a| auc_means[ds][a]).collect();
            match (aucs, t) {
                (Some(a), Some(t)) => {
                    auc_table.push(a);
                    fid_table.push(t.worst_case.clone());
                }
                _ => self.notes.push(format!(
                    "{}: left out of the rank gap (missing cells)",
                    ctx.datasets[ds].entry.name
                )),
            }
        }
        if auc_table.is_empty() {
            self.emit_csv("tables/rankgap.csv", &["algorithm", "rank_gap"], &[])?;
            return Ok(false);
        }
        let gaps = rank_gap(&auc_table, &fid_table)?;
        let rows: Vec<Vec<String>> = candidates
            .iter()
            .zip(gaps)
            .map(|(c, g)| vec![c.clone(), num(g)])
            .collect();
        self.emit_csv("tables/rankgap.csv", &["algorithm", "rank_gap"], &rows)?;
        Ok(auc_table.len() == fidelity.len())
    }

    fn fairness(&mut self) -> Result<bool> {
        let ctx = self.ctx;
        let s0 = ctx.cfg.seeds[0];
        let reference_id = ctx.cfg.fairness_reference().id.clone();
        let mut rows = Vec::new();
        let mut complete = true;
        for ds in 0..ctx.datasets.len() {
            let entry = ctx.datasets[ds].entry.clone();
            if entry.groups.is_empty() {
                self.notes
                    .push(format!("{}: no group columns, fairness skipped", entry.name));
                continue;
            }
            let Some(reference) = self.model(ds, &reference_id, s0, "train")? else {
                complete = false;
                continue;
            };
            let mut models = Vec::new();
            for (id, _) in &ctx.trainers {
                match self.model(ds, id, s0, "train")? {
                    Some(m) => models.push((id.clone(), m)),
                    None => complete = false,
                }
            }
            for feature in &ctx.drop {
                if !ablates(&ctx.datasets[ds], feature) {
                    self.notes
                        .push(format!("{}: no column `{feature}` to drop", entry.name));
                    continue;
                }
                let id = ablated_id(&reference_id, feature);
                match self.model(ds, &id, s0, "ablate")? {
                    Some(m) => models.push((id, m)),
                    None => complete = false,
                }
            }
            let data = self.dataset(ds, s0)?;
            let mut notes = Vec::new();
            for (id, m) in &models {
                for col in &entry.groups {
                    let report = subgroup_report(m, &data.raw, &data.split.test, col, Some(&reference))?;
                    notes.extend(report.notes.iter().map(|n| format!("{}/{id}/{col}: {n}", entry.name)));
                    for g in std::iter::once(&report.overall).chain(&report.groups) {
                        rows.push(vec![
                            entry.name.clone(),
                            id.clone(),
                            col.clone(),
                            g.group.clone(),
                            g.n.to_string(),
                            num(g.loss),
                            g.reference_loss.map(num).unwrap_or_default(),
                            g.relative_pct.map(num).unwrap_or_default(),
                        ]);
                    }
                }
            }
            self.notes.extend(notes);
        }
        self.emit_csv(
            "tables/fairness.csv",
            &[
                "dataset",
                "model",
                "column",
                "group",
                "n",
                "loss",
                "reference_loss",
                "relative_pct",
            ],
            &rows,
        )?;
        Ok(complete)
    }

    fn plots(&mut self) -> Result<bool> {
        let ctx = self.ctx;
        let s0 = ctx.cfg.seeds[0];
        let mut complete = true;
        for ds in 0..ctx.datasets.len() {
            let name = ctx.datasets[ds].entry.name.clone();
            let mut models = Vec::new();
            for (id, _) in &ctx.trainers {
                match self.model(ds, id, s0, "train")? {
                    Some(m) => models.push((id.clone(), m)),
                    None => complete = false,
                }
            }
            let dir = ctx.out.join("plots").join(&name);
            let data = self.dataset(ds, s0)?.clone();
            let mut files = Vec::new();
            for (id, m) in &models {
                files.extend(export_shapes(m, &data, &dir.join(id))?);
            }
            if models.len() > 1 {
                let series: Vec<(&str, &AdditiveModel)> = models.iter().map(|(id, m)| (id.as_str(), m)).collect();
                files.extend(export_overlay(&series, &data, &dir.join("overlay"))?);
            }
            self.record_files(&files)?;
        }
        Ok(complete)
    }
}

pub(crate) fn build(ctx: &Context<'_>, manifest: &mut RunManifest) -> Result<()> {
    let mut b = Builder {
        ctx,
        manifest,
        artifacts: BTreeMap::new(),
        notes: Vec::new(),
        data: HashMap::new(),
    };
    let mut status: BTreeMap<String, String> = BTreeMap::new();
    let mut set = |t: Task, ok: bool| {
        status.insert(t.name().to_string(), if ok { "ok" } else { "failed" }.to_string());
    };
    let mut auc_means = None;
    let mut fidelity = None;
    if ctx.tasks.contains(&Task::Accuracy) {
        let (ok, means) = b.accuracy()?;
        set(Task::Accuracy, ok);
        auc_means = Some(means);
    }
    if ctx.tasks.contains(&Task::Density) {
        set(Task::Density, b.density()?);
    }
    if ctx.tasks.contains(&Task::Biasvar) {
        set(Task::Biasvar, b.biasvar()?);
    }
    if ctx.tasks.contains(&Task::Fidelity) {
        let (ok, tables) = b.fidelity()?;
        set(Task::Fidelity, ok);
        fidelity = Some(tables);
    }
    if let (true, Some(a), Some(f)) = (ctx.tasks.contains(&Task::Rankgap), &auc_means, &fidelity) {
        set(Task::Rankgap, b.rankgap(a, f)?);
    }
    if ctx.tasks.contains(&Task::Fairness) {
        set(Task::Fairness, b.fairness()?);
    }
    if ctx.tasks.contains(&Task::Plots) {
        set(Task::Plots, b.plots()?);
    }
    let (artifacts, notes) = (b.artifacts, b.notes);
    manifest.tasks = status;
    manifest.artifacts = artifacts;
    manifest.notes = notes;
    Ok(())
}

/// Recompute the summary table from an existing `tables/accuracy.csv`.
pub fn summarize_run(run_dir: &Path) -> Result<crate::summary::Summary> {
    let path = run_dir.join("tables/accuracy.csv");
    let mut reader =
        csv::Reader::from_path(&path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
    let mut datasets: Vec<String> = Vec::new();
    let mut algorithms: Vec<String> = Vec::new();
    let mut means: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(gamlab::Error::from)?;
        if &rec[2] != "mean" {
            continue;
        }
        let d = position_or_push(&mut datasets, &rec[0]);
        let a = position_or_push(&mut algorithms, &rec[1]);
        let v: f64 = rec[3]
            .parse()
            .map_err(|_| BenchError::Config(format!("bad AUC `{}` in {}", &rec[3], path.display())))?;
        means.insert((d, a), v);
    }
    let table: Vec<Vec<Option<f64>>> = (0..datasets.len())
        .map(|d| (0..algorithms.len()).map(|a| means.get(&(d, a)).copied()).collect())
        .collect();
    Ok(summarize(&datasets, &algorithms, &table))
}

fn position_or_push(list: &mut Vec<String>, item: &str) -> usize {
    match list.iter().position(|x| x == item) {
        Some(i) => i,
        None => {
            list.push(item.to_string());
            list.len() - 1
        }
    }
}
