//! One entry point over every algorithm family.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boost::{fit_boosted, BoostConfig, BoostMode};
use crate::data::{stratified_partition, BinnedDataset, CategoricalEncoding, RawDataset, SplitPlan, DEFAULT_MAX_BINS};
use crate::error::{Error, Result};
use crate::model::AdditiveModel;
use crate::smooth::flam::{fit_flam, FlamConfig};
use crate::smooth::linear::{fit_linear_cv, LinearConfig, LinearVariant, Penalty};
use crate::smooth::spline::{fit_spline, SplineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Ebm,
    EbmBf,
    Xgb,
    XgbL2,
    Spline,
    Flam,
    Lr,
    Lasso,
    Ilr,
    Mlr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 10] = [
        Algorithm::Ebm,
        Algorithm::EbmBf,
        Algorithm::Xgb,
        Algorithm::XgbL2,
        Algorithm::Spline,
        Algorithm::Flam,
        Algorithm::Lr,
        Algorithm::Lasso,
        Algorithm::Ilr,
        Algorithm::Mlr,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Ebm => "ebm",
            Algorithm::EbmBf => "ebm-bf",
            Algorithm::Xgb => "xgb",
            Algorithm::XgbL2 => "xgb-l2",
            Algorithm::Spline => "spline",
            Algorithm::Flam => "flam",
            Algorithm::Lr => "lr",
            Algorithm::Lasso => "lasso",
            Algorithm::Ilr => "ilr",
            Algorithm::Mlr => "mlr",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 8/8 bags, 2000 rounds, FLAM path 40, spline grid 10.
    #[default]
    Desk,
    /// 100/100 bags, 30000 rounds, FLAM path 100, spline grid 15.
    Paper,
}

/// Algorithm choice plus its hyperparameters, tagged by `"algorithm"` in
/// JSON. Omitted fields take the family defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum TrainConfig {
    Ebm(BoostConfig),
    EbmBf(BoostConfig),
    Xgb(BoostConfig),
    XgbL2(BoostConfig),
    Spline(SplineConfig),
    Flam(FlamConfig),
    Lr(LinearConfig),
    Lasso(LinearConfig),
    Ilr(LinearConfig),
    Mlr(LinearConfig),
}

impl TrainConfig {
    pub fn preset(algorithm: Algorithm, scale: Scale) -> Self {
        let boost = |mode: BoostMode| {
            let base = match mode {
                // Depth-1 XGBoost defaults: eta 0.3, two leaves per tree.
                BoostMode::Newton | BoostMode::NewtonOneFeature => BoostConfig {
                    learning_rate: 0.3,
                    leaves_per_stump: 2,
                    inner_bags: 0,
                    mode,
                    ..Default::default()
                },
                _ => BoostConfig {
                    mode,
                    ..Default::default()
                },
            };
            match scale {
                Scale::Desk => base,
                Scale::Paper => {
                    let inner = base.inner_bags;
                    BoostConfig {
                        inner_bags: if inner == 0 { 0 } else { 100 },
                        ..base.paper_scale()
                    }
                }
            }
        };
        let linear = |penalty: Penalty| LinearConfig {
            penalty,
            ..Default::default()
        };
        match algorithm {
            Algorithm::Ebm => TrainConfig::Ebm(boost(BoostMode::Cyclic)),
            Algorithm::EbmBf => TrainConfig::EbmBf(boost(BoostMode::BestFirst)),
            Algorithm::Xgb => TrainConfig::Xgb(boost(BoostMode::Newton)),
            Algorithm::XgbL2 => TrainConfig::XgbL2(boost(BoostMode::NewtonOneFeature)),
            Algorithm::Spline => TrainConfig::Spline(match scale {
                Scale::Desk => SplineConfig::desk(),
                Scale::Paper => SplineConfig::default(),
            }),
            Algorithm::Flam => TrainConfig::Flam(match scale {
                Scale::Desk => FlamConfig::desk(),
                Scale::Paper => FlamConfig::default(),
            }),
            Algorithm::Lr => TrainConfig::Lr(linear(Penalty::L2)),
            Algorithm::Lasso => TrainConfig::Lasso(linear(Penalty::L1)),
            Algorithm::Ilr => TrainConfig::Ilr(linear(Penalty::L2)),
            Algorithm::Mlr => TrainConfig::Mlr(linear(Penalty::L2)),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainConfig::Ebm(_) => Algorithm::Ebm,
            TrainConfig::EbmBf(_) => Algorithm::EbmBf,
            TrainConfig::Xgb(_) => Algorithm::Xgb,
            TrainConfig::XgbL2(_) => Algorithm::XgbL2,
            TrainConfig::Spline(_) => Algorithm::Spline,
            TrainConfig::Flam(_) => Algorithm::Flam,
            TrainConfig::Lr(_) => Algorithm::Lr,
            TrainConfig::Lasso(_) => Algorithm::Lasso,
            TrainConfig::Ilr(_) => Algorithm::Ilr,
            TrainConfig::Mlr(_) => Algorithm::Mlr,
        }
    }

    /// Copy with the random seed replaced (no-op for the spline trainer).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            TrainConfig::Ebm(c) | TrainConfig::EbmBf(c) | TrainConfig::Xgb(c) | TrainConfig::XgbL2(c) => c.seed = seed,
            TrainConfig::Flam(c) => c.seed = seed,
            TrainConfig::Lr(c) | TrainConfig::Lasso(c) | TrainConfig::Ilr(c) | TrainConfig::Mlr(c) => c.seed = seed,
            TrainConfig::Spline(_) => {}
        }
        out
    }

    /// First 8 bytes (hex) of the SHA-256 of the JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TrainConfig::Ebm(c) | TrainConfig::EbmBf(c) | TrainConfig::Xgb(c) | TrainConfig::XgbL2(c) => c.validate(),
            TrainConfig::Flam(c) => c.validate(),
            TrainConfig::Lr(c) | TrainConfig::Lasso(c) | TrainConfig::Ilr(c) | TrainConfig::Mlr(c) => c.validate(),
            TrainConfig::Spline(c) => {
                if c.lambda_grid.is_empty() || c.max_basis < 4 {
                    Err(Error::Config("spline needs a lambda grid and max_basis >= 4".into()))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// A configured trainer: hyperparameters plus the bin count used when it
/// prepares its own binning.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub config: TrainConfig,
    pub max_bins: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Self {
        Trainer {
            config,
            max_bins: DEFAULT_MAX_BINS,
        }
    }

    pub fn preset(algorithm: Algorithm, scale: Scale) -> Self {
        Trainer::new(TrainConfig::preset(algorithm, scale))
    }

    pub fn with_max_bins(mut self, max_bins: usize) -> Self {
        self.max_bins = max_bins;
        self
    }

    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm()
    }

    /// Fit on `data`'s training split (boosted trainers also use its
    /// validation split). The model is centered on the training rows.
    pub fn fit(&self, data: &BinnedDataset, seed: u64) -> Result<AdditiveModel> {
        let cfg = self.config.with_seed(seed);
        cfg.validate()?;
        let mut model = match &cfg {
            TrainConfig::Ebm(c) | TrainConfig::EbmBf(c) => fit_boosted(data, c)?.0,
            TrainConfig::Xgb(c) | TrainConfig::XgbL2(c) => {
                let one_hot = BinnedDataset {
                    spec: data.spec.clone().with_encoding(CategoricalEncoding::OneHot),
                    ..data.clone()
                };
                fit_boosted(&one_hot, c)?.0
            }
            TrainConfig::Spline(c) => fit_spline(data, c)?,
            TrainConfig::Flam(c) => fit_flam(data, c)?,
            TrainConfig::Lr(c) | TrainConfig::Lasso(c) => fit_linear_cv(data, LinearVariant::Plain, c)?.model,
            TrainConfig::Ilr(c) => fit_linear_cv(data, LinearVariant::IndicatorBins, c)?.model,
            TrainConfig::Mlr(c) => fit_linear_cv(data, LinearVariant::Marginal, c)?.model,
        };
        model.algorithm = cfg.algorithm().id().to_string();
        model.seed = seed;
        model.config_digest = cfg.digest();
        model.binning_digest = data.spec.digest();
        Ok(model)
    }

    /// Bin `raw` on `split.train` and fit.
    pub fn fit_split(&self, raw: Arc<RawDataset>, split: SplitPlan, seed: u64) -> Result<AdditiveModel> {
        let data = BinnedDataset::prepare(raw, split, self.max_bins)?;
        self.fit(&data, seed)
    }

    /// Fit using only `rows`: they are split 85/15 (stratified) into
    /// training and early-stopping rows, binning is fitted on the former.
    pub fn fit_rows(&self, raw: Arc<RawDataset>, rows: &[usize], seed: u64) -> Result<AdditiveModel> {
        let parts = stratified_partition(rows, &raw.labels, seed, &[0.85, 0.15])?;
        let split = SplitPlan {
            seed,
            fractions: [0.85, 0.15, 0.0],
            train: parts[0].clone(),
            val: parts[1].clone(),
            test: Vec::new(),
        };
        self.fit_split(raw, split, seed)
    }
}
