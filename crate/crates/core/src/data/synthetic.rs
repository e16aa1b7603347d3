//! Gaussian-blob classification data.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LabeledExample;
use crate::rng::{derive_seed, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub input_dim: usize,
    pub examples_per_class: usize,
    /// Minimum pairwise distance between class means.
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.input_dim == 0 || self.examples_per_class == 0 {
            return Err(Error::config(
                "synthetic data needs positive num_classes, input_dim and examples_per_class",
            ));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(Error::config("class_separation must be a positive number"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise_sigma must be a non-negative number"));
        }
        Ok(())
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Places `count` points in `dim` dimensions with pairwise distance at least
/// `separation`, by rejection sampling in a box that grows on repeated misses.
pub fn class_means(count: usize, dim: usize, separation: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(derive_seed(seed, "class-means", &[]));
    let mut half_width = separation * (count as f64).powf(1.0 / dim as f64);
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut misses = 0;
    while means.len() < count {
        let candidate: Vec<f64> = (0..dim).map(|_| rng.random_range(-half_width..=half_width)).collect();
        if means.iter().all(|m| distance(m, &candidate) >= separation) {
            means.push(candidate);
            misses = 0;
        } else {
            misses += 1;
            if misses == 1000 {
                half_width *= 1.5;
                misses = 0;
            }
        }
    }
    means
}

fn sample_blob(
    mean: &[f64],
    sigma: f64,
    label: usize,
    count: usize,
    rng: &mut impl Rng,
) -> impl Iterator<Item = LabeledExample> {
    let rows: Vec<LabeledExample> = (0..count)
        .map(|_| {
            let features = mean
                .iter()
                .map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            LabeledExample::new(features, label)
        })
        .collect();
    rows.into_iter()
}

/// Isotropic Gaussian blobs, one per class, emitted class by class.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<LabeledExample>> {
    spec.validate()?;
    let means = class_means(spec.num_classes, spec.input_dim, spec.class_separation, spec.seed);
    let mut rng = rng_from(derive_seed(spec.seed, "samples", &[]));
    let mut out = Vec::with_capacity(spec.num_classes * spec.examples_per_class);
    for (label, mean) in means.iter().enumerate() {
        out.extend(sample_blob(
            mean,
            spec.noise_sigma,
            label,
            spec.examples_per_class,
            &mut rng,
        ));
    }
    Ok(out)
}

/// Feature-shifted variant of [`generate_synthetic`]: every group sees the
/// same labels, but all its class means are translated by a group-specific
/// offset of length `shift`. Returns `(group, example)` pairs.
pub fn generate_feature_shifted(
    spec: &SyntheticSpec,
    num_groups: usize,
    shift: f64,
) -> Result<Vec<(usize, LabeledExample)>> {
    spec.validate()?;
    if num_groups == 0 {
        return Err(Error::config("need at least one feature group"));
    }
    let means = class_means(spec.num_classes, spec.input_dim, spec.class_separation, spec.seed);
    let mut offset_rng = rng_from(derive_seed(spec.seed, "group-offsets", &[]));
    let mut rng = rng_from(derive_seed(spec.seed, "samples", &[]));
    let mut out = Vec::new();
    for group in 0..num_groups {
        let direction: Vec<f64> = (0..spec.input_dim)
            .map(|_| offset_rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let offset: Vec<f64> = direction.iter().map(|v| v * shift / norm).collect();
        for (label, mean) in means.iter().enumerate() {
            let shifted: Vec<f64> = mean.iter().zip(&offset).map(|(m, o)| m + o).collect();
            out.extend(
                sample_blob(&shifted, spec.noise_sigma, label, spec.examples_per_class, &mut rng).map(|ex| (group, ex)),
            );
        }
    }
    Ok(out)
}
