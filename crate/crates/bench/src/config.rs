//! Experiment configuration: which datasets, algorithms, seeds and tasks a
//! run covers.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use gamlab::data::{load_csv, read_schema, LoadOptions, DEFAULT_MAX_BINS};
use gamlab::metrics::{BiasVarianceConfig, LabelMode};
use gamlab::trainer::Scale;
use gamlab::{Algorithm, RawDataset, TrainConfig, Trainer};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    /// CSV path, relative to the config file.
    pub path: PathBuf,
    pub label: String,
    /// Sensitive columns reported on by the fairness task.
    #[serde(default)]
    pub groups: Vec<String>,
    /// Schema override JSON, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_label: Option<String>,
    /// Replace missing numerics by the training-split mean.
    #[serde(default)]
    pub impute_mean: bool,
}

impl DatasetEntry {
    pub fn load(&self) -> Result<RawDataset> {
        let mut opts = LoadOptions::new(self.label.clone());
        opts.group_columns = self.groups.clone();
        opts.positive_label = self.positive_label.clone();
        opts.name = Some(self.name.clone());
        if let Some(schema) = &self.schema {
            opts.schema = read_schema(schema)?;
        }
        Ok(load_csv(&self.path, &opts)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmEntry {
    /// Column label in every table. Without `config` it must name an
    /// algorithm, whose preset at the run's scale is used.
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<TrainConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Accuracy,
    Density,
    Biasvar,
    Fidelity,
    Fairness,
    Rankgap,
    Plots,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Accuracy,
        Task::Density,
        Task::Biasvar,
        Task::Fidelity,
        Task::Fairness,
        Task::Rankgap,
        Task::Plots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Accuracy => "accuracy",
            Task::Density => "density",
            Task::Biasvar => "biasvar",
            Task::Fidelity => "fidelity",
            Task::Fairness => "fairness",
            Task::Rankgap => "rankgap",
            Task::Plots => "plots",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown task `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelityOptions {
    /// Algorithm ids used as ground truth; all configured ids when empty.
    pub generators: Vec<String>,
    /// Algorithm ids scored against each generator; all when empty.
    pub candidates: Vec<String>,
    pub label_mode: LabelMode,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairnessOptions {
    /// Algorithm id whose losses the others are compared against; the first
    /// configured algorithm when absent.
    pub reference: Option<String>,
    /// Features to drop from the reference algorithm and retrain without.
    pub drop: Vec<String>,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_tasks() -> Vec<Task> {
    vec![Task::Accuracy]
}

fn default_max_bins() -> usize {
    DEFAULT_MAX_BINS
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetEntry>,
    pub algorithms: Vec<AlgorithmEntry>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default = "default_max_bins")]
    pub max_bins: usize,
    /// Output directory, relative to the config file.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub biasvar: BiasVarianceConfig,
    #[serde(default)]
    pub fidelity: FidelityOptions,
    #[serde(default)]
    pub fairness: FairnessOptions,
}

impl ExperimentConfig {
    /// Parse, resolve relative paths against the file's directory, and
    /// validate.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            join(&mut d.path);
            if let Some(s) = &mut d.schema {
                join(s);
            }
        }
        join(&mut self.output);
    }

    /// SHA-256 (hex) of the settings that determine results. Paths and the
    /// output directory are left out so a moved run keeps its digest.
    pub fn digest(&self) -> String {
        let mut stripped = self.clone();
        stripped.output = PathBuf::new();
        for d in &mut stripped.datasets {
            d.path = PathBuf::new();
            d.schema = None;
        }
        let json = serde_json::to_string(&stripped).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.datasets.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() {
            return bad("datasets, algorithms and seeds must be non-empty".into());
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(&d.name) {
                return bad(format!("duplicate dataset name `{}`", d.name));
            }
            if !d.path.is_file() {
                return bad(format!("dataset `{}`: {} not found", d.name, d.path.display()));
            }
            if let Some(s) = &d.schema {
                if !s.is_file() {
                    return bad(format!("dataset `{}`: schema {} not found", d.name, s.display()));
                }
            }
            if !safe_component(&d.name) {
                return bad(format!("dataset name `{}` is not a plain file name", d.name));
            }
        }
        let mut ids = BTreeSet::new();
        for a in &self.algorithms {
            if !ids.insert(a.id.as_str()) {
                return bad(format!("duplicate algorithm id `{}`", a.id));
            }
            if !safe_component(&a.id) {
                return bad(format!("algorithm id `{}` is not a plain file name", a.id));
            }
            self.trainer(a)?
                .config
                .validate()
                .map_err(|e| BenchError::Config(format!("{}: {e}", a.id)))?;
        }
        let known = |list: &[String], what: &str| -> Result<()> {
            match list.iter().find(|id| !ids.contains(id.as_str())) {
                Some(id) => bad(format!("{what} `{id}` is not a configured algorithm")),
                None => Ok(()),
            }
        };
        known(&self.fidelity.generators, "fidelity generator")?;
        known(&self.fidelity.candidates, "fidelity candidate")?;
        if let Some(r) = &self.fairness.reference {
            known(std::slice::from_ref(r), "fairness reference")?;
        }
        if self.tasks.contains(&Task::Fidelity) && self.fidelity_candidates().len() < 2 {
            return bad("fidelity needs at least two candidates".into());
        }
        if self.tasks.contains(&Task::Rankgap)
            && !(self.tasks.contains(&Task::Accuracy) && self.tasks.contains(&Task::Fidelity))
        {
            return bad("rankgap needs the accuracy and fidelity tasks".into());
        }
        if self.max_bins < 2 {
            return bad("max_bins must be at least 2".into());
        }
        Ok(())
    }

    pub fn trainer(&self, entry: &AlgorithmEntry) -> Result<Trainer> {
        let config = match &entry.config {
            Some(c) => c.clone(),
            None => {
                let algo: Algorithm = entry.id.parse().map_err(|_| {
                    BenchError::Config(format!(
                        "algorithm `{}` needs a config (not a known algorithm id)",
                        entry.id
                    ))
                })?;
                TrainConfig::preset(algo, self.scale)
            }
        };
        Ok(Trainer::new(config).with_max_bins(self.max_bins))
    }

    pub fn algorithm(&self, id: &str) -> Result<&AlgorithmEntry> {
        self.algorithms
            .iter()
            .find(|a| a.id == id)
            .ok_or_else(|| BenchError::Config(format!("algorithm `{id}` not in config")))
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetEntry> {
        self.datasets
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| BenchError::Config(format!("dataset `{name}` not in config")))
    }

    pub fn fidelity_generators(&self) -> Vec<&AlgorithmEntry> {
        self.pick(&self.fidelity.generators)
    }

    pub fn fidelity_candidates(&self) -> Vec<&AlgorithmEntry> {
        self.pick(&self.fidelity.candidates)
    }

    pub fn fairness_reference(&self) -> &AlgorithmEntry {
        self.fairness
            .reference
            .as_deref()
            .and_then(|r| self.algorithms.iter().find(|a| a.id == r))
            .unwrap_or(&self.algorithms[0])
    }

    fn pick(&self, ids: &[String]) -> Vec<&AlgorithmEntry> {
        if ids.is_empty() {
            self.algorithms.iter().collect()
        } else {
            ids.iter()
                .filter_map(|id| self.algorithms.iter().find(|a| &a.id == id))
                .collect()
        }
    }
}

fn safe_component(s: &str) -> bool {
    !s.is_empty() && s != "." && s != ".." && !s.contains(['/', '\\'])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(dir: &Path) -> String {
        std::fs::write(dir.join("d.csv"), "x,y\n1,0\n2,1\n").unwrap();
        r#"{"datasets": [{"name": "d", "path": "d.csv", "label": "y"}],
            "algorithms": [{"id": "ebm"}, {"id": "lr"}]}"#
            .to_string()
    }

    #[test]
    fn defaults_and_path_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, minimal(dir.path())).unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.tasks, vec![Task::Accuracy]);
        assert_eq!(cfg.scale, Scale::Desk);
        assert_eq!(cfg.datasets[0].path, dir.path().join("d.csv"));
        assert_eq!(cfg.output, dir.path().join("out"));
        assert_eq!(cfg.fairness_reference().id, "ebm");
    }

    #[test]
    fn digest_ignores_location() {
        let dir = tempfile::tempdir().unwrap();
        let text = minimal(dir.path());
        let mut a = ExperimentConfig::from_json(&text).unwrap();
        let b = a.clone();
        a.resolve_paths(Path::new("/elsewhere"));
        assert_eq!(a.digest(), b.digest());
        let mut c = b.clone();
        c.seeds = vec![9];
        assert_ne!(c.digest(), b.digest());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let text = minimal(dir.path());
        let check = |edit: &dyn Fn(&mut ExperimentConfig)| {
            let mut cfg = ExperimentConfig::from_json(&text).unwrap();
            cfg.resolve_paths(dir.path());
            edit(&mut cfg);
            cfg.validate()
        };
        assert!(check(&|_| {}).is_ok());
        assert!(check(&|c| c.algorithms[1].id = "ebm".into()).is_err());
        assert!(check(&|c| c.algorithms[1].id = "mystery".into()).is_err());
        assert!(check(&|c| c.datasets[0].path = "nope.csv".into()).is_err());
        assert!(check(&|c| c.fidelity.generators = vec!["xgb".into()]).is_err());
        assert!(check(&|c| c.tasks = vec![Task::Rankgap]).is_err());
        assert!(check(&|c| c.seeds.clear()).is_err());
        assert!(ExperimentConfig::from_json(r#"{"datasets": [], "algorithms": [], "bogus": 1}"#).is_err());
    }

    #[test]
    fn custom_algorithm_entries_carry_their_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("d.csv"), "x,y\n1,0\n2,1\n").unwrap();
        let text = r#"{"datasets": [{"name": "d", "path": "d.csv", "label": "y"}],
            "algorithms": [{"id": "fast-ebm", "config": {"algorithm": "ebm", "outer_bags": 2}},
                           {"id": "lr"}]}"#;
        let mut cfg = ExperimentConfig::from_json(text).unwrap();
        cfg.resolve_paths(dir.path());
        cfg.validate().unwrap();
        let t = cfg.trainer(&cfg.algorithms[0]).unwrap();
        assert_eq!(t.algorithm(), Algorithm::Ebm);
        let TrainConfig::Ebm(b) = &t.config else { panic!() };
        assert_eq!(b.outer_bags, 2);
    }
}
