//! Influence by retraining, used as ground truth for the lazy scores.
//!
//! `M0` is trained on `D0` and `M1` on `D0 ∪ B`, both from the same
//! initialization, until the per-epoch change in training loss drops below a
//! threshold. The influence of `B` is `val_loss(M0) − val_loss(M1)`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward_loss, init_params, local_train, LabeledExample, ModelSpec, ParamVector, TrainConfig};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Stop once `|loss(epoch) − loss(epoch − 1)|` falls below this.
    pub threshold: f64,
    pub max_epochs: usize,
    /// Seeds the shared initialization and the per-epoch shuffles.
    #[serde(default)]
    pub seed: u64,
}

/// State of a run the moment it first met one threshold.
#[derive(Debug, Clone)]
pub struct ThresholdCheckpoint {
    pub threshold: f64,
    pub params: ParamVector,
    pub epochs: usize,
    /// False when the epoch cap was hit first.
    pub converged: bool,
    /// Training time from the start of the run to this checkpoint.
    pub elapsed: Duration,
}

/// Trains from `init` on `data`, recording a checkpoint for every threshold.
/// One pass serves all thresholds: a run that meets a tight threshold has
/// already met every looser one. Checkpoints come back in the order of
/// `thresholds`.
pub fn train_to_thresholds(
    spec: &ModelSpec,
    init: &ParamVector,
    data: &[LabeledExample],
    cfg: &ConvergenceConfig,
    thresholds: &[f64],
) -> Result<Vec<ThresholdCheckpoint>> {
    if data.is_empty() {
        return Err(Error::config("cannot train on an empty dataset"));
    }
    if thresholds.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::config("convergence thresholds must be non-negative"));
    }
    let start = Instant::now();
    let mut theta = init.clone();
    let mut prev = forward_loss(spec, &theta, data)?;
    let mut pending: Vec<usize> = (0..thresholds.len()).collect();
    let mut found: Vec<Option<ThresholdCheckpoint>> = vec![None; thresholds.len()];

    let mut epoch = 0;
    while !pending.is_empty() && epoch < cfg.max_epochs {
        let step = TrainConfig {
            epochs: 1,
            learning_rate: cfg.learning_rate,
            batch_size: cfg.batch_size,
            shuffle_seed: derive_seed(cfg.seed, "exact-epoch", &[epoch as u64]),
        };
        theta = local_train(spec, &theta, data, &step).map_err(|e| match e {
            Error::Divergence { .. } => Error::Divergence { epoch },
            other => other,
        })?;
        epoch += 1;
        let loss = forward_loss(spec, &theta, data)?;
        let delta = (prev - loss).abs();
        prev = loss;
        pending.retain(|&t| {
            if delta < thresholds[t] {
                found[t] = Some(ThresholdCheckpoint {
                    threshold: thresholds[t],
                    params: theta.clone(),
                    epochs: epoch,
                    converged: true,
                    elapsed: start.elapsed(),
                });
                false
            } else {
                true
            }
        });
    }
    for t in pending {
        found[t] = Some(ThresholdCheckpoint {
            threshold: thresholds[t],
            params: theta.clone(),
            epochs: epoch,
            converged: false,
            elapsed: start.elapsed(),
        });
    }
    Ok(found.into_iter().map(Option::unwrap).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactInfluence {
    /// `val_loss(M0) − val_loss(M1)`, mean losses.
    pub value: f64,
    pub base_epochs: usize,
    pub augmented_epochs: usize,
    /// Both models met the threshold before the epoch cap.
    pub converged: bool,
}

/// Retraining influence of `batch` on a model trained from `base_train`.
pub fn exact_influence(
    spec: &ModelSpec,
    base_train: &[LabeledExample],
    batch: &[LabeledExample],
    validation: &[LabeledExample],
    cfg: &ConvergenceConfig,
) -> Result<ExactInfluence> {
    if base_train.is_empty() {
        return Err(Error::config("exact influence needs a non-empty base training set"));
    }
    let init = init_params(spec, derive_seed(cfg.seed, "exact-init", &[]));
    let augmented: Vec<LabeledExample> = base_train.iter().chain(batch).cloned().collect();
    let m0 = train_to_thresholds(spec, &init, base_train, cfg, &[cfg.threshold])?.remove(0);
    let m1 = train_to_thresholds(spec, &init, &augmented, cfg, &[cfg.threshold])?.remove(0);
    Ok(ExactInfluence {
        value: forward_loss(spec, &m0.params, validation)? - forward_loss(spec, &m1.params, validation)?,
        base_epochs: m0.epochs,
        augmented_epochs: m1.epochs,
        converged: m0.converged && m1.converged,
    })
}
