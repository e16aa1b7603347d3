//! Two-means on scalar scores, used by each client in the peer-to-peer path.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from;

const MAX_ITERATIONS: usize = 100;
const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoMeans {
    /// Indices in the cluster with the larger centroid, ascending.
    pub beneficial: Vec<usize>,
    /// Midpoint between the two centroids.
    pub frontier: f64,
    pub low_centroid: f64,
    pub high_centroid: f64,
    /// All values were equal, so everything was declared beneficial.
    pub degenerate: bool,
}

/// Splits `values` into a high ("beneficial") and a low group with 1-D
/// k-means, k = 2, seeded by k-means++. Points exactly on the frontier go to
/// the high group.
pub fn kmeans_two(values: &[f64], seed: u64) -> Result<TwoMeans> {
    if values.len() < 2 {
        return Err(Error::config("two-means needs at least 2 values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("two-means values must be finite"));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(TwoMeans {
            beneficial: (0..values.len()).collect(),
            frontier: min,
            low_centroid: min,
            high_centroid: min,
            degenerate: true,
        });
    }

    let mut rng = rng_from(seed);
    let first = values[rng.random_range(0..values.len())];
    let weights: Vec<f64> = values.iter().map(|v| (v - first) * (v - first)).collect();
    let second = values[WeightedIndex::new(&weights)
        .expect("values are not all equal")
        .sample(&mut rng)];
    let (mut lo, mut hi) = (first.min(second), first.max(second));

    let assign = |lo: f64, hi: f64| -> Vec<bool> { values.iter().map(|&v| (v - hi).abs() <= (v - lo).abs()).collect() };
    for _ in 0..MAX_ITERATIONS {
        let high = assign(lo, hi);
        let mean = |want: bool, fallback: f64| {
            let (sum, count) = values
                .iter()
                .zip(&high)
                .filter(|(_, &h)| h == want)
                .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
            if count == 0 {
                fallback
            } else {
                sum / count as f64
            }
        };
        let (new_lo, new_hi) = (mean(false, lo), mean(true, hi));
        let moved = (new_lo - lo).abs().max((new_hi - hi).abs());
        lo = new_lo.min(new_hi);
        hi = new_lo.max(new_hi);
        if moved < TOLERANCE {
            break;
        }
    }

    let high = assign(lo, hi);
    Ok(TwoMeans {
        beneficial: (0..values.len()).filter(|&i| high[i]).collect(),
        frontier: 0.5 * (lo + hi),
        low_centroid: lo,
        high_centroid: hi,
        degenerate: false,
    })
}
