//! Lazy influence between clients.
//!
//! Client `j` runs a handful of SGD epochs from the shared warm-up model
//! `θ0` on a batch of its own training data, producing a *partial model*
//! `θ̃_j`. Client `i` scores `j` by how much that partial model lowers the loss
//! on `i`'s validation set:
//!
//! ```text
//! I(i, j) = Σ_{z ∈ V_i} [ L(z, θ0) − L(z, θ̃_j) ]
//! ```
//!
//! Positive scores mean `j`'s data pulls the model in a direction that helps
//! `i`. The partial models are computed once per client and reused by every
//! evaluator, so a full `N × N` matrix costs `N` short trainings plus `N²`
//! forward passes.

mod bench;
mod exact;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ClientShard;
use crate::error::{Error, Result};
use crate::model::{forward_loss, local_train, LabeledExample, ModelSpec, ParamVector, TrainConfig};
use crate::rng::{derive_seed, rng_from};

pub use bench::{speedup_benchmark, speedup_csv, BenchScenario, SpeedupReport, SpeedupRow, SPEEDUP_HEADER};
pub use exact::{exact_influence, train_to_thresholds, ConvergenceConfig, ExactInfluence, ThresholdCheckpoint};

/// Settings for the partial-model training behind each lazy score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiaConfig {
    /// Local epochs `k` used to build each partial model.
    #[serde(default = "default_epochs_k")]
    pub epochs_k: usize,
    #[serde(default = "default_lia_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_lia_batch")]
    pub batch_size: usize,
    /// Fraction of a client's training set used as its scoring batch.
    #[serde(default = "default_fraction")]
    pub train_batch_fraction: f64,
    /// Salt for batch selection and shuffling. Experiments derive it from the run seed.
    #[serde(skip)]
    pub seed: u64,
}

fn default_epochs_k() -> usize {
    20
}
fn default_lia_lr() -> f64 {
    0.05
}
fn default_lia_batch() -> usize {
    16
}
fn default_fraction() -> f64 {
    1.0
}

impl Default for LiaConfig {
    fn default() -> Self {
        LiaConfig {
            epochs_k: default_epochs_k(),
            learning_rate: default_lia_lr(),
            batch_size: default_lia_batch(),
            train_batch_fraction: default_fraction(),
            seed: 0,
        }
    }
}

impl LiaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs_k == 0 {
            return Err(Error::config("lia.epochs_k must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("lia.learning_rate must be a non-negative number"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("lia.batch_size must be positive"));
        }
        if !(self.train_batch_fraction > 0.0 && self.train_batch_fraction <= 1.0) {
            return Err(Error::config("lia.train_batch_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// The scoring batch `Z_j`: a seeded subset of the client's training set.
pub fn scoring_batch(client: &ClientShard, cfg: &LiaConfig) -> Vec<LabeledExample> {
    let mut batch = client.train.clone();
    batch.shuffle(&mut rng_from(derive_seed(
        cfg.seed,
        "lia-batch",
        &[client.client_id as u64],
    )));
    let keep = (cfg.train_batch_fraction * batch.len() as f64).ceil() as usize;
    batch.truncate(keep.clamp(1, batch.len()));
    batch
}

/// `θ̃_j`: `k` epochs of SGD from `theta0` on client `j`'s scoring batch.
pub fn partial_model(
    spec: &ModelSpec,
    theta0: &ParamVector,
    client: &ClientShard,
    cfg: &LiaConfig,
) -> Result<ParamVector> {
    if client.train.is_empty() {
        return Err(Error::config(format!(
            "client {} has no training data",
            client.client_id
        )));
    }
    let batch = scoring_batch(client, cfg);
    let train = TrainConfig {
        epochs: cfg.epochs_k,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        shuffle_seed: derive_seed(cfg.seed, "lia-train", &[client.client_id as u64]),
    };
    local_train(spec, theta0, &batch, &train)
}

/// Summed validation-loss drop from `theta0` to `partial` on `validation`.
pub fn lazy_influence(
    spec: &ModelSpec,
    theta0: &ParamVector,
    partial: &ParamVector,
    validation: &[LabeledExample],
) -> Result<f64> {
    let base = forward_loss(spec, theta0, validation)?;
    let after = forward_loss(spec, partial, validation)?;
    Ok(validation.len() as f64 * (base - after))
}

/// Scores of every evaluator `i` (row) for every contributor `j` (column).
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    n: usize,
    scores: Vec<f64>,
    /// How many partial models were trained to build this matrix.
    pub partial_trainings: usize,
}

impl InfluenceMatrix {
    /// Wraps a row-major `n × n` score table.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::dim("influence matrix must be square"));
        }
        let scores: Vec<f64> = rows.into_iter().flatten().collect();
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::dim("influence scores must be finite"));
        }
        Ok(InfluenceMatrix {
            n,
            scores,
            partial_trainings: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.scores.chunks(self.n)
    }

    /// CSV with header `j0,...,j{N-1}` and one row per evaluator, floats at
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.n).map(|j| format!("j{j}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| crate::report::fmt_f64(*v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Trains one partial model per client, then scores all `N²` pairs against
/// the evaluators' validation sets.
pub fn build_influence_matrix(
    spec: &ModelSpec,
    theta0: &ParamVector,
    shards: &[ClientShard],
    cfg: &LiaConfig,
) -> Result<InfluenceMatrix> {
    if shards.len() < 2 {
        return Err(Error::config("an influence matrix needs at least 2 clients"));
    }
    let partials: Vec<ParamVector> = shards
        .par_iter()
        .map(|client| partial_model(spec, theta0, client, cfg))
        .collect::<Result<_>>()?;

    let rows: Vec<Vec<f64>> = shards
        .par_iter()
        .map(|evaluator| {
            let v = &evaluator.validation;
            let base = forward_loss(spec, theta0, v)?;
            partials
                .iter()
                .map(|p| Ok(v.len() as f64 * (base - forward_loss(spec, p, v)?)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut matrix = InfluenceMatrix::from_rows(rows)?;
    matrix.partial_trainings = partials.len();
    Ok(matrix)
}
