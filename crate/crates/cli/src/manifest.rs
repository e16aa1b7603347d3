use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use pfedlia::config::{load_config, ExperimentConfig};
use pfedlia::influence::BenchScenario;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// What a finished command leaves next to its outputs. Feeding the file back
/// through `--config` repeats the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// First 16 hex digits of the config hash, then the Unix time in seconds.
    pub run_id: String,
    pub command: String,
    /// SHA-256 of the compact JSON form of `config_snapshot`.
    pub config_sha256: String,
    /// Resolved config with every default written out.
    pub config_snapshot: Value,
    pub seeds: Vec<u64>,
    /// Output files relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, snapshot: &impl Serialize, seeds: Vec<u64>, artifacts: Vec<String>) -> Self {
        let config_snapshot = serde_json::to_value(snapshot).expect("config serializes");
        let config_sha256 = config_hash(&config_snapshot);
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            run_id: format!("{}-{secs}", &config_sha256[..16]),
            command: command.to_string(),
            config_sha256,
            config_snapshot,
            seeds,
            artifacts,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

pub fn config_hash(snapshot: &Value) -> String {
    hex::encode(Sha256::digest(snapshot.to_string().as_bytes()))
}

/// The snapshot inside `text` if it is a manifest.
fn snapshot_of(text: &str) -> Option<Value> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(mut map)) if map.contains_key("run_id") && map.contains_key("config_snapshot") => {
            map.remove("config_snapshot")
        }
        _ => None,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Loads an experiment config from a config file or a previous manifest.
pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = read(path)?;
    match snapshot_of(&text) {
        Some(snapshot) => ExperimentConfig::from_json(&snapshot.to_string())
            .map_err(|e| CliError::Config(format!("{} (config_snapshot): {e}", path.display()))),
        None => Ok(load_config(path)?),
    }
}

/// Loads a benchmark scenario; with no path the built-in scenario is used.
pub fn load_scenario(path: Option<&Path>) -> Result<BenchScenario, CliError> {
    let Some(path) = path else {
        return Ok(BenchScenario::default());
    };
    let text = read(path)?;
    let parsed = match snapshot_of(&text) {
        Some(snapshot) => serde_json::from_value::<BenchScenario>(snapshot),
        None => serde_json::from_str::<BenchScenario>(&text),
    };
    let scenario = parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    scenario
        .validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(scenario)
}
