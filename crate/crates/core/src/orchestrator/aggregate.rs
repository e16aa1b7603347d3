use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::model::ParamVector;
use crate::rng::rng_from;

/// Slack for `fraction · |pool|` landing a rounding error above an integer.
const CEIL_SLACK: f64 = 1e-9;

/// Weighted mean of `models`, accumulated in the given order as a running
/// mean. Identical inputs therefore come back bit for bit.
pub fn fedavg_aggregate(models: &[ParamVector], weights: &[f64]) -> Result<ParamVector> {
    let Some(first) = models.first() else {
        return Err(Error::config("cannot aggregate zero models"));
    };
    if weights.len() != models.len() {
        return Err(Error::dim(format!(
            "{} weights for {} models",
            weights.len(),
            models.len()
        )));
    }
    if models.iter().any(|m| m.len() != first.len()) {
        return Err(Error::dim("models to aggregate differ in length"));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::config("aggregation weights must be finite and non-negative"));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::config("aggregation weights are all zero"));
    }
    let mut mean = vec![0.0; first.len()];
    let mut seen = 0.0;
    for (m, &w) in models.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        seen += w;
        let step = w / seen;
        for (acc, v) in mean.iter_mut().zip(m.as_slice()) {
            *acc += step * (v - *acc);
        }
    }
    Ok(ParamVector::new(mean))
}

/// `⌈fraction · |pool|⌉` members of `pool` drawn uniformly without
/// replacement, returned in ascending order.
pub fn sample_clients(pool: &[usize], fraction: f64, round_seed: u64) -> Vec<usize> {
    if pool.is_empty() {
        return Vec::new();
    }
    let k = ((fraction * pool.len() as f64 - CEIL_SLACK).ceil() as usize).clamp(1, pool.len());
    let mut picked: Vec<usize> = sample(&mut rng_from(round_seed), pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}
