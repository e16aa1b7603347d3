//! A deterministic simulator for clustered personalized federated learning.
//!
//! Clients score each other with lazy influence: every client briefly
//! trains a shared warm-up model on its own data, and every other client
//! measures how much that partial model lowers the loss on its validation
//! set. The resulting `N × N` matrix is clustered once, centrally with OPTICS
//! or per client with two-means, and FedAvg then runs inside each group.
//!
//! ```
//! use pfedlia::config::ExperimentConfig;
//! use pfedlia::orchestrator::run_experiment;
//!
//! let cfg = ExperimentConfig::from_json(r#"{
//!     "method": "pfedlia_central",
//!     "num_clients": 12,
//!     "participation_fraction": 0.5,
//!     "total_rounds": 4,
//!     "warmup_rounds": 2,
//!     "model": {"kind": "softmax-regression", "input_dim": 4, "num_classes": 6},
//!     "partition": {"scheme": "pathological", "num_clusters": 3},
//!     "data": {"synthetic": {"examples_per_class": 40}},
//!     "seeds": [0]
//! }"#).unwrap();
//! let run = run_experiment(&cfg, 0).unwrap();
//! assert_eq!(run.logs.len(), 4);
//! assert_eq!(run.influence_builds, 1);
//! ```

pub mod clustering;
pub mod config;
pub mod data;
pub mod error;
pub mod influence;
pub mod model;
pub mod orchestrator;
pub mod report;
pub mod rng;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/influence.md")]
    mod influence {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
}
