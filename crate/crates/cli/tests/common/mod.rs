#![allow(dead_code)]

use pfedlia::config::ExperimentConfig;

/// 100 clients, 10 labels in 5 clusters, class separation 10σ. The hidden
/// layer of width 4 cannot separate all ten labels at once but does fine on
/// the two labels of a single cluster.
pub const PATHOLOGICAL: &str = r#"{
    "method": "METHOD",
    "total_rounds": 60,
    "warmup_rounds": 5,
    "local_epochs_per_round": 5,
    "train": {"learning_rate": 0.1, "batch_size": 10},
    "model": {"kind": "mlp", "input_dim": 8, "hidden_dim": 4, "num_classes": 10},
    "partition": {"scheme": "pathological", "num_clusters": 5},
    "data": {"synthetic": {"examples_per_class": 400, "class_separation": 10.0, "noise_sigma": 1.0}}
}"#;

/// Half of the clients also hold one label from another cluster. Classes
/// overlap and each client sees about ten examples, so training alone is
/// data-starved.
pub const NOISY: &str = r#"{
    "method": "METHOD",
    "total_rounds": 60,
    "warmup_rounds": 5,
    "local_epochs_per_round": 5,
    "train": {"learning_rate": 0.1, "batch_size": 10},
    "model": {"kind": "mlp", "input_dim": 8, "hidden_dim": 4, "num_classes": 10},
    "partition": {"scheme": "noisy", "num_clusters": 5, "noisy_extra_labels": 1, "noisy_probability": 0.5},
    "data": {"synthetic": {"examples_per_class": 100, "class_separation": 1.5, "noise_sigma": 1.0}}
}"#;

/// Small and quick: 20 clients, 6 labels, 3 clusters.
pub const SMALL: &str = r#"{
    "method": "METHOD",
    "num_clients": 20,
    "participation_fraction": 0.25,
    "total_rounds": 8,
    "warmup_rounds": 3,
    "local_epochs_per_round": 2,
    "train": {"learning_rate": 0.1, "batch_size": 10},
    "model": {"kind": "mlp", "input_dim": 6, "hidden_dim": 3, "num_classes": 6},
    "partition": {"scheme": "pathological", "num_clusters": 3},
    "data": {"synthetic": {"examples_per_class": 60, "class_separation": 10.0, "noise_sigma": 1.0}},
    "seeds": [0, 1]
}"#;

pub fn fixture(template: &str, method: &str) -> String {
    template.replace("METHOD", method)
}

pub fn config(template: &str, method: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&fixture(template, method)).expect("fixture is valid")
}
