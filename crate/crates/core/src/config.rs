//! Declarative experiment settings, loaded from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::OpticsParams;
use crate::data::PartitionScheme;
use crate::error::{Error, Result};
use crate::influence::LiaConfig;
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fedavg,
    LocalOnly,
    Oracle,
    PfedliaCentral,
    PfedliaP2p,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Fedavg => "fedavg",
            Method::LocalOnly => "local_only",
            Method::Oracle => "oracle",
            Method::PfedliaCentral => "pfedlia_central",
            Method::PfedliaP2p => "pfedlia_p2p",
        }
    }

    /// Methods that build an influence matrix.
    pub fn is_pfedlia(&self) -> bool {
        matches!(self, Method::PfedliaCentral | Method::PfedliaP2p)
    }
}

/// Optimizer settings for the per-round local training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            learning_rate: default_lr(),
            batch_size: default_batch(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub scheme: PartitionScheme,
    #[serde(default = "default_clusters")]
    pub num_clusters: usize,
    #[serde(default = "default_extra_labels")]
    pub noisy_extra_labels: usize,
    #[serde(default = "default_noisy_probability")]
    pub noisy_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    #[serde(default = "default_per_class")]
    pub examples_per_class: usize,
    #[serde(default = "default_separation")]
    pub class_separation: f64,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
}

impl Default for SyntheticData {
    fn default() -> Self {
        SyntheticData {
            examples_per_class: default_per_class(),
            class_separation: default_separation(),
            noise_sigma: default_sigma(),
        }
    }
}

/// Synthetic data whose clusters share labels but differ by a shift of all
/// class means. Each partition cluster is one feature group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftedData {
    #[serde(default = "default_per_class")]
    pub examples_per_class: usize,
    #[serde(default = "default_separation")]
    pub class_separation: f64,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    /// Distance between a group's class means and the unshifted ones.
    pub shift: f64,
}

impl ShiftedData {
    pub fn base(&self) -> SyntheticData {
        SyntheticData {
            examples_per_class: self.examples_per_class,
            class_separation: self.class_separation,
            noise_sigma: self.noise_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticData),
    FeatureShifted(ShiftedData),
    Idx { images: PathBuf, labels: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticData::default())
    }
}

impl DataSource {
    /// Short dataset label for summaries.
    pub fn name(&self) -> String {
        match self {
            DataSource::Synthetic(_) => "synthetic".to_string(),
            DataSource::FeatureShifted(_) => "feature_shifted".to_string(),
            DataSource::Idx { images, .. } => {
                let stem = images.file_stem().map(|s| s.to_string_lossy().into_owned());
                format!("idx:{}", stem.unwrap_or_default())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    #[serde(default = "default_clients")]
    pub num_clients: usize,
    #[serde(default = "default_participation")]
    pub participation_fraction: f64,
    #[serde(default = "default_total_rounds")]
    pub total_rounds: usize,
    #[serde(default = "default_warmup")]
    pub warmup_rounds: usize,
    #[serde(default = "default_local_epochs")]
    pub local_epochs_per_round: usize,
    #[serde(default)]
    pub lia: LiaConfig,
    #[serde(default)]
    pub optics: OpticsParams,
    #[serde(default)]
    pub train: TrainSettings,
    pub model: ModelSpec,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub data: DataSource,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_lr() -> f64 {
    0.05
}
fn default_batch() -> usize {
    16
}
fn default_clusters() -> usize {
    5
}
fn default_extra_labels() -> usize {
    1
}
fn default_noisy_probability() -> f64 {
    0.5
}
fn default_per_class() -> usize {
    400
}
fn default_separation() -> f64 {
    10.0
}
fn default_sigma() -> f64 {
    1.0
}
fn default_clients() -> usize {
    100
}
fn default_participation() -> f64 {
    0.1
}
fn default_total_rounds() -> usize {
    60
}
fn default_warmup() -> usize {
    20
}
fn default_local_epochs() -> usize {
    1
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3]
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be a positive number, got {v}")))
    }
}

impl ExperimentConfig {
    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.lia.validate()?;
        self.optics.validate()?;
        if self.num_clients == 0 {
            return Err(Error::config("num_clients must be positive"));
        }
        if !(self.participation_fraction > 0.0 && self.participation_fraction <= 1.0) {
            return Err(Error::config("participation_fraction must lie in (0, 1]"));
        }
        if self.participation_fraction * (self.num_clients as f64) < 1.0 {
            return Err(Error::config("participation_fraction · num_clients must be at least 1"));
        }
        if self.total_rounds == 0 {
            return Err(Error::config("total_rounds must be positive"));
        }
        if self.method.is_pfedlia() && self.warmup_rounds >= self.total_rounds {
            return Err(Error::config(
                "warmup_rounds must be below total_rounds for pfedlia methods",
            ));
        }
        if self.method.is_pfedlia() && self.num_clients < 2 {
            return Err(Error::config("pfedlia methods need at least 2 clients"));
        }
        if self.method == Method::PfedliaCentral && self.num_clients < self.optics.min_pts {
            return Err(Error::config(format!(
                "optics.min_pts = {} exceeds num_clients = {}",
                self.optics.min_pts, self.num_clients
            )));
        }
        if self.local_epochs_per_round == 0 {
            return Err(Error::config("local_epochs_per_round must be positive"));
        }
        if !(self.train.learning_rate >= 0.0 && self.train.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate must be a non-negative number"));
        }
        if self.train.batch_size == 0 {
            return Err(Error::config("train.batch_size must be positive"));
        }
        if self.partition.num_clusters == 0 {
            return Err(Error::config("partition.num_clusters must be positive"));
        }
        if !(0.0..=1.0).contains(&self.partition.noisy_probability) {
            return Err(Error::config("partition.noisy_probability must lie in [0, 1]"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::config(format!("seed {dup} is listed twice")));
        }
        match &self.data {
            DataSource::Synthetic(s) => self.check_synthetic(s)?,
            DataSource::FeatureShifted(s) => {
                self.check_synthetic(&s.base())?;
                if !(s.shift >= 0.0 && s.shift.is_finite()) {
                    return Err(Error::config(
                        "data.feature_shifted.shift must be a non-negative number",
                    ));
                }
                if self.partition.scheme != PartitionScheme::Iid {
                    return Err(Error::config(
                        "feature_shifted data groups clients by feature shift; use partition.scheme = \"iid\"",
                    ));
                }
            }
            DataSource::Idx { images, labels } => {
                if images.as_os_str().is_empty() || labels.as_os_str().is_empty() {
                    return Err(Error::config("data.idx needs both images and labels paths"));
                }
            }
        }
        Ok(())
    }

    fn check_synthetic(&self, s: &SyntheticData) -> Result<()> {
        if s.examples_per_class == 0 {
            return Err(Error::config("data examples_per_class must be positive"));
        }
        positive("data class_separation", s.class_separation)?;
        positive("data noise_sigma", s.noise_sigma)
    }

    /// Parses and validates a JSON config.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The resolved config with every default spelled out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads, parses and validates a config file. Parse errors carry the line,
/// column and offending key.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text).map_err(|e| match e {
        Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
