use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gamlab::data::DEFAULT_MAX_BINS;
use gamlab::metrics::{auc, cross_entropy, feature_density, subgroup_report};
use gamlab::trainer::Scale;
use gamlab::{AdditiveModel, Algorithm, BinnedDataset, TrainConfig, Trainer};
use gamlab_bench::config::{DatasetEntry, ExperimentConfig, Task};
use gamlab_bench::error::{BenchError, Result};
use gamlab_bench::plot::{export_overlay, export_shapes};
use gamlab_bench::runner::{self, load_model, prepare_dataset, RunOptions};
use gamlab_bench::summarize_run;

/// Train, evaluate and compare generalized additive models.
#[derive(Parser)]
#[command(name = "gamlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// A dataset, split with a seed exactly as the runner does. With
/// `--config`, `--dataset` names an entry of the config; otherwise it is a
/// CSV path and `--label` is required.
#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Label column of a CSV given directly.
    #[arg(long)]
    label: Option<String>,
    /// Replace missing numerics by the training-split mean.
    #[arg(long)]
    impute_mean: bool,
    /// Split seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one algorithm on one dataset and save the model JSON.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Algorithm id from the config, or an algorithm name.
        #[arg(long)]
        algo: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// AUC and log-loss of a saved model on one split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitName,
    },
    /// Feature density curve of a saved model.
    Density {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Per-group test log-loss of a saved model.
    Fairness {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Group column.
        #[arg(long)]
        group: String,
        /// Model the losses are compared against.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Shape CSV and SVG files for a model, or an overlay of several.
    Plot {
        #[arg(long)]
        model: PathBuf,
        /// Further models drawn on the same axes.
        #[arg(long)]
        overlay: Vec<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a whole experiment grid.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated task list overriding the config.
        #[arg(long, value_delimiter = ',')]
        tasks: Option<Vec<Task>>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run only the bias/variance task of a config.
    Biasvar {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run only the fidelity task of a config.
    Fidelity {
        #[arg(long)]
        config: PathBuf,
    },
    /// Retrain the fairness reference without the given features.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        drop: Vec<String>,
    },
    /// Average AUC, rank and normalized AUC of a finished run.
    Summarize {
        /// Run directory.
        #[arg(long)]
        run: PathBuf,
    },
    /// Print the preset configuration of an algorithm.
    Defaults {
        #[arg(long)]
        algo: Algorithm,
        #[arg(long, default_value = "desk")]
        scale: String,
    },
}

fn prepared(args: &DataArgs) -> Result<(Option<ExperimentConfig>, BinnedDataset)> {
    let (cfg, entry) = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            let entry = cfg.dataset(&args.dataset)?.clone();
            (Some(cfg), entry)
        }
        None => {
            let label = args
                .label
                .clone()
                .ok_or_else(|| BenchError::Config("--label is required without --config".into()))?;
            let path = PathBuf::from(&args.dataset);
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            (
                None,
                DatasetEntry {
                    name,
                    path,
                    label,
                    groups: Vec::new(),
                    schema: None,
                    positive_label: None,
                    impute_mean: false,
                },
            )
        }
    };
    let max_bins = cfg.as_ref().map_or(DEFAULT_MAX_BINS, |c| c.max_bins);
    let raw = Arc::new(entry.load()?);
    let data = prepare_dataset(&raw, entry.impute_mean || args.impute_mean, args.seed, max_bins)?;
    Ok((cfg, data))
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("json"));
}

fn run_tasks(config: &Path, opts: RunOptions) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(config)?;
    let outcome = runner::run(&cfg, &opts)?;
    eprintln!(
        "{} cells computed, {} reused, {} failed; output in {}",
        outcome.computed,
        outcome.skipped,
        outcome.failed,
        cfg.output.display()
    );
    for note in &outcome.manifest.notes {
        eprintln!("note: {note}");
    }
    if outcome.failed > 0 {
        for c in outcome.manifest.cells.iter().filter(|c| c.error.is_some()) {
            eprintln!("failed {}: {}", c.id, c.error.as_deref().unwrap_or(""));
        }
        return Err(BenchError::CellsFailed(outcome.failed));
    }
    Ok(ExitCode::SUCCESS)
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { data, algo, out } => {
            let (cfg, prepared) = prepared(&data)?;
            let trainer = match cfg {
                Some(cfg) => cfg.trainer(cfg.algorithm(&algo)?)?,
                None => Trainer::preset(algo.parse()?, Scale::Desk),
            };
            let model = trainer.fit(&prepared, data.seed)?;
            model.save(&out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Eval { model, data, split } => {
            let (_, d) = prepared(&data)?;
            let model = load_model(&model)?;
            let rows = match split {
                SplitName::Train => &d.split.train,
                SplitName::Val => &d.split.val,
                SplitName::Test => &d.split.test,
            };
            let p = model.probabilities(&d.raw, rows)?;
            let t: Vec<f64> = rows.iter().map(|&r| d.labels()[r]).collect();
            print_json(&serde_json::json!({
                "rows": rows.len(),
                "auc": auc(&p, &t)?,
                "logloss": cross_entropy(&p, &t),
            }));
        }
        Command::Density { model, data } => {
            let (_, d) = prepared(&data)?;
            print_json(&feature_density(&load_model(&model)?, &d)?);
        }
        Command::Fairness {
            model,
            data,
            group,
            reference,
        } => {
            let (_, d) = prepared(&data)?;
            let reference = reference.as_deref().map(load_model).transpose()?;
            let report = subgroup_report(&load_model(&model)?, &d.raw, &d.split.test, &group, reference.as_ref())?;
            print_json(&report);
        }
        Command::Plot {
            model,
            overlay,
            data,
            out,
        } => {
            let (_, d) = prepared(&data)?;
            let files = if overlay.is_empty() {
                export_shapes(&load_model(&model)?, &d, &out)?
            } else {
                let paths: Vec<PathBuf> = std::iter::once(model).chain(overlay).collect();
                let models: Vec<(String, AdditiveModel)> = paths
                    .iter()
                    .map(|p| {
                        let label = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                        Ok((label, load_model(p)?))
                    })
                    .collect::<Result<_>>()?;
                let series: Vec<(&str, &AdditiveModel)> = models.iter().map(|(l, m)| (l.as_str(), m)).collect();
                export_overlay(&series, &d, &out)?
            };
            eprintln!("wrote {} files to {}", files.len(), out.display());
        }
        Command::Run { config, tasks, threads } => {
            return run_tasks(
                &config,
                RunOptions {
                    tasks,
                    threads,
                    ..Default::default()
                },
            )
        }
        Command::Biasvar { config } => {
            return run_tasks(
                &config,
                RunOptions {
                    tasks: Some(vec![Task::Biasvar]),
                    ..Default::default()
                },
            )
        }
        Command::Fidelity { config } => {
            return run_tasks(
                &config,
                RunOptions {
                    tasks: Some(vec![Task::Fidelity]),
                    ..Default::default()
                },
            )
        }
        Command::Ablate { config, drop } => {
            return run_tasks(
                &config,
                RunOptions {
                    tasks: Some(vec![Task::Fairness]),
                    drop: Some(drop),
                    ..Default::default()
                },
            )
        }
        Command::Summarize { run } => {
            let summary = summarize_run(&run)?;
            println!("algorithm,average_auc,average_rank,normalized_auc");
            for r in &summary.rows {
                println!(
                    "{},{:.2},{:.2},{:.1}",
                    r.algorithm, r.average_auc, r.average_rank, r.normalized_auc
                );
            }
            for n in &summary.notes {
                eprintln!("note: {n}");
            }
        }
        Command::Defaults { algo, scale } => {
            let scale: Scale = serde_json::from_value(serde_json::Value::String(scale.clone()))
                .map_err(|_| BenchError::Config(format!("unknown scale `{scale}` (desk or paper)")))?;
            print_json(&TrainConfig::preset(algo, scale));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
