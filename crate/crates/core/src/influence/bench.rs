//! Wall-clock comparison of lazy influence against retraining influence.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::exact::{train_to_thresholds, ConvergenceConfig};
use super::{lazy_influence, LiaConfig};
use crate::data::{generate_synthetic, ClientShard, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{forward_loss, init_params, LabeledExample, ModelSpec};
use crate::report::fmt_f64;
use crate::rng::{derive_seed, rng_from};

pub const SPEEDUP_HEADER: &str = "threshold,lia_seconds,exact_seconds,ratio";

/// Floor applied to the lazy timing before dividing.
const MIN_SECONDS: f64 = 1e-9;

/// A benchmark setup: `base_size` points train `M0`, `batch_size` points form
/// the scored batch `B`, and `validation_size` IID points evaluate both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchScenario {
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default = "default_base")]
    pub base_size: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_validation")]
    pub validation_size: usize,
    #[serde(default = "default_separation")]
    pub class_separation: f64,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    /// Optimizer and epoch cap for the retraining runs (its `threshold` is ignored).
    #[serde(default = "default_exact")]
    pub exact: ConvergenceConfig,
    #[serde(default = "default_lia")]
    pub lia: LiaConfig,
    /// Timings are medians over this many repetitions.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_model() -> ModelSpec {
    ModelSpec::mlp(16, 32, 10)
}
fn default_base() -> usize {
    990
}
fn default_batch() -> usize {
    10
}
fn default_validation() -> usize {
    100
}
fn default_separation() -> f64 {
    4.0
}
fn default_sigma() -> f64 {
    1.0
}
fn default_thresholds() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_exact() -> ConvergenceConfig {
    ConvergenceConfig {
        learning_rate: 0.05,
        batch_size: 32,
        threshold: 0.0,
        max_epochs: 2000,
        seed: 0,
    }
}
fn default_lia() -> LiaConfig {
    LiaConfig {
        epochs_k: 20,
        learning_rate: 0.05,
        batch_size: 10,
        train_batch_fraction: 1.0,
        seed: 0,
    }
}
fn default_repeats() -> usize {
    3
}

impl Default for BenchScenario {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl BenchScenario {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.lia.validate()?;
        if self.base_size == 0 || self.validation_size == 0 {
            return Err(Error::config("base_size and validation_size must be positive"));
        }
        if self.thresholds.is_empty() {
            return Err(Error::config("at least one convergence threshold is required"));
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::config("thresholds must be positive numbers"));
        }
        if self.repeats == 0 || self.exact.max_epochs == 0 || self.exact.batch_size == 0 {
            return Err(Error::config(
                "repeats, exact.max_epochs and exact.batch_size must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub threshold: f64,
    pub lia_seconds: f64,
    pub exact_seconds: f64,
    pub ratio: f64,
    pub exact_epochs: usize,
    pub converged: bool,
    pub exact_influence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupReport {
    pub lia_influence: f64,
    pub rows: Vec<SpeedupRow>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn split_data(s: &BenchScenario) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>, Vec<LabeledExample>)> {
    let total = s.base_size + s.batch_size + s.validation_size;
    let classes = s.model.num_classes;
    let mut data = generate_synthetic(&SyntheticSpec {
        num_classes: classes,
        input_dim: s.model.input_dim,
        examples_per_class: total.div_ceil(classes),
        class_separation: s.class_separation,
        noise_sigma: s.noise_sigma,
        seed: derive_seed(s.seed, "bench-data", &[]),
    })?;
    data.shuffle(&mut rng_from(derive_seed(s.seed, "bench-split", &[])));
    let validation = data.split_off(s.base_size + s.batch_size);
    let batch = data.split_off(s.base_size);
    Ok((data, batch, validation[..s.validation_size].to_vec()))
}

/// Times one lazy score (partial model on `B` plus validation scoring) and
/// one retraining run on `D0 ∪ B` per threshold. `M0` is trained up front and
/// not timed; it also serves as the warm-up model for the lazy score.
pub fn speedup_benchmark(scenario: &BenchScenario) -> Result<SpeedupReport> {
    scenario.validate()?;
    let spec = &scenario.model;
    let (base, batch, validation) = split_data(scenario)?;
    let init = init_params(spec, derive_seed(scenario.seed, "bench-init", &[]));
    let tightest = scenario.thresholds.iter().cloned().fold(f64::INFINITY, f64::min);
    let exact_cfg = ConvergenceConfig {
        seed: scenario.seed,
        ..scenario.exact
    };

    let theta0 = train_to_thresholds(spec, &init, &base, &exact_cfg, &[tightest])?
        .remove(0)
        .params;
    let m0_loss = forward_loss(spec, &theta0, &validation)?;

    // The scored batch plays the role of one client's training data.
    let client = ClientShard {
        client_id: 0,
        train: batch.clone(),
        validation: Vec::new(),
        true_cluster: 0,
    };
    let lia_cfg = LiaConfig {
        seed: scenario.seed,
        ..scenario.lia
    };
    let mut lia_times = Vec::new();
    let mut lia_value = 0.0;
    for _ in 0..scenario.repeats {
        let start = Instant::now();
        let partial = super::partial_model(spec, &theta0, &client, &lia_cfg)?;
        lia_value = lazy_influence(spec, &theta0, &partial, &validation)?;
        lia_times.push(start.elapsed().as_secs_f64());
    }
    let lia_seconds = median(lia_times).max(MIN_SECONDS);

    let augmented: Vec<LabeledExample> = base.iter().chain(&batch).cloned().collect();
    let mut per_threshold: Vec<Vec<f64>> = vec![Vec::new(); scenario.thresholds.len()];
    let mut last = Vec::new();
    for _ in 0..scenario.repeats {
        let checkpoints = train_to_thresholds(spec, &init, &augmented, &exact_cfg, &scenario.thresholds)?;
        let mut evaluated = Vec::new();
        let mut eval_times = Vec::new();
        for cp in &checkpoints {
            let eval_start = Instant::now();
            evaluated.push(m0_loss - forward_loss(spec, &cp.params, &validation)?);
            eval_times.push(eval_start.elapsed().as_secs_f64());
        }
        // One evaluation is charged on top of the time needed to reach each
        // checkpoint; a shared figure keeps the per-threshold times ordered.
        let eval = median(eval_times);
        for (t, cp) in checkpoints.iter().enumerate() {
            per_threshold[t].push(cp.elapsed.as_secs_f64() + eval);
        }
        last = checkpoints.into_iter().zip(evaluated).collect::<Vec<_>>();
    }

    let rows = scenario
        .thresholds
        .iter()
        .enumerate()
        .map(|(t, &threshold)| {
            let exact_seconds = median(per_threshold[t].clone());
            let (cp, value) = &last[t];
            SpeedupRow {
                threshold,
                lia_seconds,
                exact_seconds,
                ratio: exact_seconds / lia_seconds,
                exact_epochs: cp.epochs,
                converged: cp.converged,
                exact_influence: *value,
            }
        })
        .collect();
    Ok(SpeedupReport {
        lia_influence: lia_value,
        rows,
    })
}

/// `speedup.csv` contents.
pub fn speedup_csv(rows: &[SpeedupRow]) -> String {
    let mut out = String::from(SPEEDUP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(r.threshold),
            fmt_f64(r.lia_seconds),
            fmt_f64(r.exact_seconds),
            fmt_f64(r.ratio)
        ));
    }
    out
}
