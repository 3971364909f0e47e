//! Empirical bias / variance of a trainer under resampling.
//!
//! Each round draws a fresh stratified train/test split, trains `reps`
//! models on independent subsamples of the training rows, and averages
//! their predictions into `y_m`. With labels `t`:
//! - squared mode: bias `mean (t - y_m)^2`, variance `mean_k mean (y_k - y_m)^2`;
//!   their sum equals the mean per-model loss exactly.
//! - log-loss mode: bias `CE(y_m, t)`, variance `mean_k KL(y_m || y_k)`,
//!   which is zero when the models agree.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::stratified_partition;
use crate::error::{Error, Result};
use crate::metrics::accuracy::{cross_entropy, PROB_CLIP};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    #[default]
    LogLoss,
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasVarianceConfig {
    pub rounds: usize,
    pub reps: usize,
    pub subsample: f64,
    pub test_fraction: f64,
    /// Rounds that must succeed for an estimate.
    pub min_rounds: usize,
    pub loss: LossMode,
    pub seed: u64,
}

impl Default for BiasVarianceConfig {
    fn default() -> Self {
        BiasVarianceConfig {
            rounds: 8,
            reps: 5,
            subsample: 0.5,
            test_fraction: 0.15,
            min_rounds: 6,
            loss: LossMode::LogLoss,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub empirical_bias: f64,
    pub variance: f64,
    /// Mean over models of each model's own test loss.
    pub mean_loss: f64,
}

impl RoundRecord {
    /// Loss of the averaged prediction is at most the average loss.
    pub fn jensen_holds(&self, tol: f64) -> bool {
        self.empirical_bias <= self.mean_loss + tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceEstimate {
    pub empirical_bias: f64,
    pub variance: f64,
    pub mean_loss: f64,
    pub rounds: Vec<RoundRecord>,
    /// `(round, reason)` for rounds dropped after a training failure.
    pub discarded: Vec<(usize, String)>,
}

fn clip(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

/// `KL(Bern(a) || Bern(b))` with both clipped away from 0 and 1.
pub fn bernoulli_kl(a: f64, b: f64) -> f64 {
    let (a, b) = (clip(a), clip(b));
    a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln()
}

/// Score one round from per-model predictions `preds[k][i]` and targets.
pub fn round_losses(preds: &[Vec<f64>], t: &[f64], mode: LossMode) -> (f64, f64, f64) {
    let k = preds.len() as f64;
    let n = t.len() as f64;
    let ym: Vec<f64> = (0..t.len())
        .map(|i| preds.iter().map(|p| p[i]).sum::<f64>() / k)
        .collect();
    match mode {
        LossMode::Squared => {
            let bias = t.iter().zip(&ym).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
            let var = preds
                .iter()
                .map(|p| p.iter().zip(&ym).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
                .sum::<f64>()
                / k;
            let total = preds
                .iter()
                .map(|p| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
                .sum::<f64>()
                / k;
            (bias, var, total)
        }
        LossMode::LogLoss => {
            let bias = cross_entropy(&ym, t);
            let var = preds
                .iter()
                .map(|p| p.iter().zip(&ym).map(|(&a, &b)| bernoulli_kl(b, a)).sum::<f64>() / n)
                .sum::<f64>()
                / k;
            let total = preds.iter().map(|p| cross_entropy(p, t)).sum::<f64>() / k;
            (bias, var, total)
        }
    }
}

/// Run the protocol over rows `0..labels.len()`. `fit_predict(train, test,
/// seed)` trains on `train` and returns one prediction per `test` row.
pub fn bias_variance<F>(labels: &[f64], cfg: &BiasVarianceConfig, fit_predict: F) -> Result<BiasVarianceEstimate>
where
    F: Fn(&[usize], &[usize], u64) -> Result<Vec<f64>>,
{
    if cfg.reps < 1 || cfg.rounds < 1 || cfg.min_rounds > cfg.rounds {
        return Err(Error::Config(
            "bias/variance needs reps >= 1 and min_rounds <= rounds".into(),
        ));
    }
    if !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        return Err(Error::Config("subsample must be in (0, 1]".into()));
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let mut rounds = Vec::new();
    let mut discarded = Vec::new();
    'round: for r in 0..cfg.rounds {
        let round_seed = seed::derive(cfg.seed, r as u64);
        let parts = stratified_partition(&all, labels, round_seed, &[1.0 - cfg.test_fraction, cfg.test_fraction])?;
        let (train, test) = (&parts[0], &parts[1]);
        let t: Vec<f64> = test.iter().map(|&i| labels[i]).collect();
        let take = ((train.len() as f64 * cfg.subsample).round() as usize).clamp(1, train.len());
        let mut preds = Vec::with_capacity(cfg.reps);
        for k in 0..cfg.reps {
            let rep_seed = seed::derive(round_seed, k as u64 + 1);
            let mut rows: Vec<usize> = sample(&mut seed::rng(rep_seed), train.len(), take)
                .into_iter()
                .map(|i| train[i])
                .collect();
            rows.sort_unstable();
            match fit_predict(&rows, test, rep_seed) {
                Ok(p) if p.len() == test.len() && p.iter().all(|x| x.is_finite()) => preds.push(p),
                Ok(_) => {
                    discarded.push((r, format!("rep {k} returned malformed predictions")));
                    continue 'round;
                }
                Err(e) => {
                    discarded.push((r, format!("rep {k}: {e}")));
                    continue 'round;
                }
            }
        }
        let (empirical_bias, variance, mean_loss) = round_losses(&preds, &t, cfg.loss);
        rounds.push(RoundRecord {
            round: r,
            empirical_bias,
            variance,
            mean_loss,
        });
    }
    if rounds.len() < cfg.min_rounds {
        return Err(Error::Metric(format!(
            "only {} of {} bias/variance rounds succeeded",
            rounds.len(),
            cfg.rounds
        )));
    }
    let m = rounds.len() as f64;
    Ok(BiasVarianceEstimate {
        empirical_bias: rounds.iter().map(|r| r.empirical_bias).sum::<f64>() / m,
        variance: rounds.iter().map(|r| r.variance).sum::<f64>() / m,
        mean_loss: rounds.iter().map(|r| r.mean_loss).sum::<f64>() / m,
        rounds,
        discarded,
    })
}
