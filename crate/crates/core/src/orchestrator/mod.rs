//! The federated round loop shared by every method.
//!
//! Rounds are numbered from 1. Rounds `1..=W` (`W = warmup_rounds`) are
//! warm-up rounds, round `W + 1` is the round in which clusters are formed
//! and every later round is clustered. The phase label follows this schedule
//! for every method so that logs of different methods line up row by row.
//!
//! Each round derives its own seed from the experiment seed. Participant
//! sampling inside a cluster is seeded by the cluster's lowest member index,
//! and a client's local shuffle by its id, so two methods that end up with
//! the same groups make the same random choices.

mod aggregate;

use rayon::prelude::*;

use crate::clustering::{cluster_centralized, cluster_peer, ClusterAssignment, PeerChoice, ReachabilityProfile};
use crate::config::{DataSource, ExperimentConfig, Method};
use crate::data::{
    generate_feature_shifted, generate_synthetic, load_idx, partition, partition_feature_groups, ClientShard,
    PartitionResult, PartitionSpec, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::influence::{build_influence_matrix, InfluenceMatrix, LiaConfig};
use crate::model::{evaluate, init_params, local_train, ModelSpec, ParamVector, TrainConfig};
use crate::rng::derive_seed;

pub use aggregate::{fedavg_aggregate, sample_clients};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Clustering,
    Clustered,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Clustering => "clustering",
            Phase::Clustered => "clustered",
        }
    }

    /// Phase of `round` under a warm-up of `warmup` rounds.
    pub fn of_round(round: usize, warmup: usize) -> Phase {
        if round <= warmup {
            Phase::Warmup
        } else if round == warmup + 1 {
            Phase::Clustering
        } else {
            Phase::Clustered
        }
    }
}

/// Accuracy of every client's deployed model after one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    pub phase: Phase,
    pub per_client_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population standard deviation over clients.
    pub std_accuracy: f64,
    /// Members per training group. In the per-client peer mode this is the
    /// size of each client's beneficial set.
    pub per_cluster_sizes: Vec<usize>,
}

impl RoundLog {
    pub fn new(round: usize, phase: Phase, per_client_accuracy: Vec<f64>, per_cluster_sizes: Vec<usize>) -> Self {
        let n = per_client_accuracy.len().max(1) as f64;
        let mean = per_client_accuracy.iter().sum::<f64>() / n;
        let var = per_client_accuracy.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        RoundLog {
            round,
            phase,
            per_client_accuracy,
            mean_accuracy: mean,
            std_accuracy: var.sqrt(),
            per_cluster_sizes,
        }
    }
}

/// Which model a client trains against and deploys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRef {
    Global,
    Cluster(usize),
    Personal(usize),
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub shard: ClientShard,
    pub model_ref: ModelRef,
}

#[derive(Debug, Clone)]
struct ModelStore {
    global: ParamVector,
    clusters: Vec<ParamVector>,
    personal: Vec<ParamVector>,
}

impl ModelStore {
    fn resolve(&self, r: ModelRef) -> &ParamVector {
        match r {
            ModelRef::Global => &self.global,
            ModelRef::Cluster(c) => &self.clusters[c],
            ModelRef::Personal(i) => &self.personal[i],
        }
    }
}

/// How training is organized after the warm-up.
#[derive(Debug, Clone, PartialEq)]
enum Plan {
    Global,
    Clusters(Vec<Vec<usize>>),
    /// Client `i` aggregates updates from members of `sets[i]`.
    Peers(Vec<Vec<usize>>),
    Local,
}

/// Result of the one-shot clustering phase.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusteringOutcome {
    Central {
        profile: ReachabilityProfile,
        /// OPTICS labels, noise included.
        optics: ClusterAssignment,
        /// Training groups: noise clients become singletons.
        assignment: ClusterAssignment,
    },
    Peer {
        choices: Vec<PeerChoice>,
        /// Present when every beneficial set is shared by all its members.
        assignment: Option<ClusterAssignment>,
    },
}

impl ClusteringOutcome {
    /// Training groups when the outcome is a partition.
    pub fn assignment(&self) -> Option<&ClusterAssignment> {
        match self {
            ClusteringOutcome::Central { assignment, .. } => Some(assignment),
            ClusteringOutcome::Peer { assignment, .. } => assignment.as_ref(),
        }
    }

    fn plan(&self) -> Plan {
        match self.assignment() {
            Some(a) => Plan::Clusters(a.groups()),
            None => match self {
                ClusteringOutcome::Peer { choices, .. } => {
                    Plan::Peers(choices.iter().map(|c| c.beneficial.clone()).collect())
                }
                ClusteringOutcome::Central { .. } => unreachable!("central outcomes carry an assignment"),
            },
        }
    }
}

/// Library-level knobs that are not part of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Skip the influence-based clustering of a pfedlia method and train
    /// these groups instead.
    pub forced_assignment: Option<ClusterAssignment>,
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub seed: u64,
    pub logs: Vec<RoundLog>,
    pub true_clusters: Vec<usize>,
    pub influence: Option<InfluenceMatrix>,
    pub clustering: Option<ClusteringOutcome>,
    /// Influence matrices built during the run.
    pub influence_builds: usize,
}

/// Generates or loads the data for `seed` and splits it across clients.
pub fn build_shards(cfg: &ExperimentConfig, seed: u64) -> Result<PartitionResult> {
    let spec = &cfg.model;
    let data_seed = derive_seed(seed, "data", &[]);
    let partition_seed = derive_seed(seed, "partition", &[]);
    let pspec = PartitionSpec {
        scheme: cfg.partition.scheme,
        num_clusters: cfg.partition.num_clusters,
        num_clients: cfg.num_clients,
        noisy_extra_labels: cfg.partition.noisy_extra_labels,
        noisy_probability: cfg.partition.noisy_probability,
        seed: partition_seed,
    };
    let synthetic = |s: &crate::config::SyntheticData| SyntheticSpec {
        num_classes: spec.num_classes,
        input_dim: spec.input_dim,
        examples_per_class: s.examples_per_class,
        class_separation: s.class_separation,
        noise_sigma: s.noise_sigma,
        seed: data_seed,
    };
    match &cfg.data {
        DataSource::Synthetic(s) => partition(&generate_synthetic(&synthetic(s))?, &pspec),
        DataSource::FeatureShifted(s) => {
            let tagged = generate_feature_shifted(&synthetic(&s.base()), cfg.partition.num_clusters, s.shift)?;
            partition_feature_groups(&tagged, cfg.num_clients, partition_seed)
        }
        DataSource::Idx { images, labels } => {
            let data = load_idx(images, labels)?;
            if let Some(ex) = data.first() {
                if ex.features.len() != spec.input_dim {
                    return Err(Error::config(format!(
                        "IDX images have {} pixels but model.input_dim is {}",
                        ex.features.len(),
                        spec.input_dim
                    )));
                }
            }
            if let Some(bad) = data.iter().find(|e| e.label >= spec.num_classes) {
                return Err(Error::config(format!(
                    "IDX label {} is outside model.num_classes = {}",
                    bad.label, spec.num_classes
                )));
            }
            partition(&data, &pspec)
        }
    }
}

fn local_update(
    spec: &ModelSpec,
    cfg: &ExperimentConfig,
    start: &ParamVector,
    shard: &ClientShard,
    shuffle_seed: u64,
) -> Result<ParamVector> {
    local_train(
        spec,
        start,
        &shard.train,
        &TrainConfig {
            epochs: cfg.local_epochs_per_round,
            learning_rate: cfg.train.learning_rate,
            batch_size: cfg.train.batch_size,
            shuffle_seed,
        },
    )
}

/// Sampled members train from `start` and the results are averaged,
/// weighted by training-set size.
fn train_group(
    spec: &ModelSpec,
    cfg: &ExperimentConfig,
    start: &ParamVector,
    participants: &[usize],
    shards: &[ClientShard],
    seed_for: impl Fn(usize) -> u64 + Sync,
) -> Result<ParamVector> {
    let updates: Vec<ParamVector> = participants
        .par_iter()
        .map(|&c| local_update(spec, cfg, start, &shards[c], seed_for(c)))
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = participants.iter().map(|&c| shards[c].train.len() as f64).collect();
    fedavg_aggregate(&updates, &weights)
}

/// One round of per-cluster FedAvg. `groups[c]` lists the members of
/// cluster `c`, whose model is `models[c]`. A single group holding every
/// client is a plain FedAvg round.
pub fn run_round_clustered(
    cfg: &ExperimentConfig,
    models: &mut [ParamVector],
    groups: &[Vec<usize>],
    shards: &[ClientShard],
    round_seed: u64,
) -> Result<()> {
    if models.len() != groups.len() {
        return Err(Error::dim(format!(
            "{} cluster models for {} clusters",
            models.len(),
            groups.len()
        )));
    }
    let spec = &cfg.model;
    let updated: Vec<Option<ParamVector>> = groups
        .par_iter()
        .zip(models.par_iter())
        .map(|(members, model)| {
            let Some(&canonical) = members.first() else {
                return Ok(None);
            };
            let sample_seed = derive_seed(round_seed, "cluster", &[canonical as u64]);
            let participants = sample_clients(members, cfg.participation_fraction, sample_seed);
            train_group(spec, cfg, model, &participants, shards, |c| {
                derive_seed(round_seed, "client", &[c as u64])
            })
            .map(Some)
        })
        .collect::<Result<_>>()?;
    for (model, new) in models.iter_mut().zip(updated) {
        if let Some(new) = new {
            *model = new;
        }
    }
    Ok(())
}

/// One round where every client keeps its own model and aggregates the
/// updates that sampled peers compute from it.
fn run_round_peers(
    cfg: &ExperimentConfig,
    personal: &mut [ParamVector],
    sets: &[Vec<usize>],
    shards: &[ClientShard],
    round_seed: u64,
) -> Result<()> {
    let spec = &cfg.model;
    let updated: Vec<ParamVector> = (0..personal.len())
        .into_par_iter()
        .map(|i| {
            let participants = sample_clients(
                &sets[i],
                cfg.participation_fraction,
                derive_seed(round_seed, "peer", &[i as u64]),
            );
            train_group(spec, cfg, &personal[i], &participants, shards, |j| {
                derive_seed(round_seed, "peer-train", &[i as u64, j as u64])
            })
        })
        .collect::<Result<_>>()?;
    personal.clone_from_slice(&updated);
    Ok(())
}

fn run_round_local(
    cfg: &ExperimentConfig,
    personal: &mut [ParamVector],
    shards: &[ClientShard],
    round_seed: u64,
) -> Result<()> {
    let updated: Vec<ParamVector> = personal
        .par_iter()
        .zip(shards.par_iter())
        .map(|(theta, shard)| {
            local_update(
                &cfg.model,
                cfg,
                theta,
                shard,
                derive_seed(round_seed, "client", &[shard.client_id as u64]),
            )
        })
        .collect::<Result<_>>()?;
    personal.clone_from_slice(&updated);
    Ok(())
}

fn round_seed(seed: u64, round: usize) -> u64 {
    derive_seed(seed, "round", &[round as u64])
}

/// Standard FedAvg over all clients for `cfg.warmup_rounds` rounds from the
/// initial model. Returns the warm-up model and one log per round.
pub fn run_warmup(cfg: &ExperimentConfig, shards: &[ClientShard], seed: u64) -> Result<(ParamVector, Vec<RoundLog>)> {
    let mut global = init_params(&cfg.model, derive_seed(seed, "init", &[]));
    let logs = global_rounds(cfg, &mut global, shards, seed, 1..=cfg.warmup_rounds)?;
    Ok((global, logs))
}

fn global_rounds(
    cfg: &ExperimentConfig,
    global: &mut ParamVector,
    shards: &[ClientShard],
    seed: u64,
    rounds: std::ops::RangeInclusive<usize>,
) -> Result<Vec<RoundLog>> {
    let everyone = vec![(0..shards.len()).collect::<Vec<_>>()];
    let mut logs = Vec::new();
    for round in rounds {
        let phase = Phase::of_round(round, cfg.warmup_rounds);
        let context = |e: Error| e.in_round(phase.name(), round);
        run_round_clustered(
            cfg,
            std::slice::from_mut(global),
            &everyone,
            shards,
            round_seed(seed, round),
        )
        .map_err(context)?;
        let acc = accuracies(&cfg.model, shards, |_| &*global).map_err(context)?;
        logs.push(RoundLog::new(round, phase, acc, vec![shards.len()]));
    }
    Ok(logs)
}

fn accuracies<'a>(
    spec: &ModelSpec,
    shards: &[ClientShard],
    deployed: impl Fn(usize) -> &'a ParamVector + Sync,
) -> Result<Vec<f64>> {
    shards
        .par_iter()
        .enumerate()
        .map(|(i, s)| Ok(evaluate(spec, deployed(i), &s.validation)?.accuracy))
        .collect()
}

/// Builds the influence matrix with every client taking part, then groups
/// the clients centrally with OPTICS or per client with two-means.
pub fn clustering_phase(
    cfg: &ExperimentConfig,
    theta0: &ParamVector,
    shards: &[ClientShard],
    seed: u64,
) -> Result<(InfluenceMatrix, ClusteringOutcome)> {
    let lia = LiaConfig {
        seed: derive_seed(seed, "lia", &[]),
        ..cfg.lia
    };
    let matrix = build_influence_matrix(&cfg.model, theta0, shards, &lia)?;
    let outcome = match cfg.method {
        Method::PfedliaCentral => {
            let (profile, optics) = cluster_centralized(&matrix, &cfg.optics)?;
            let assignment = optics.with_noise_as_singletons();
            ClusteringOutcome::Central {
                profile,
                optics,
                assignment,
            }
        }
        Method::PfedliaP2p => {
            let choices: Vec<PeerChoice> = (0..matrix.n())
                .map(|i| cluster_peer(matrix.row(i), i, derive_seed(seed, "peer-kmeans", &[i as u64])))
                .collect::<Result<_>>()?;
            let assignment = consistent_partition(&choices);
            ClusteringOutcome::Peer { choices, assignment }
        }
        other => {
            return Err(Error::config(format!(
                "method {} has no clustering phase",
                other.name()
            )));
        }
    };
    Ok((matrix, outcome))
}

/// Collapses beneficial sets into a partition when every set is shared by
/// all of its members.
fn consistent_partition(choices: &[PeerChoice]) -> Option<ClusterAssignment> {
    for (i, c) in choices.iter().enumerate() {
        debug_assert!(c.beneficial.contains(&i));
        if c.beneficial.iter().any(|&j| choices[j].beneficial != c.beneficial) {
            return None;
        }
    }
    Some(ClusterAssignment::from_labels(
        choices.iter().map(|c| c.beneficial[0] as isize).collect(),
    ))
}

/// Runs one experiment for one seed.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentRun> {
    run_experiment_with(cfg, seed, &RunOptions::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, seed: u64, opts: &RunOptions) -> Result<ExperimentRun> {
    cfg.validate()?;
    if let Some(forced) = &opts.forced_assignment {
        if forced.len() != cfg.num_clients {
            return Err(Error::config(format!(
                "forced assignment covers {} clients, config has {}",
                forced.len(),
                cfg.num_clients
            )));
        }
    }
    let parts = build_shards(cfg, seed)?;
    let true_clusters = parts.true_clusters();
    let spec = &cfg.model;
    let n = parts.shards.len();
    let shards = parts.shards;

    let init = init_params(spec, derive_seed(seed, "init", &[]));
    let mut store = ModelStore {
        global: init.clone(),
        clusters: Vec::new(),
        personal: Vec::new(),
    };
    let mut clients: Vec<ClientState> = shards
        .iter()
        .map(|s| ClientState {
            shard: s.clone(),
            model_ref: ModelRef::Global,
        })
        .collect();
    let mut plan = Plan::Global;
    if cfg.method == Method::LocalOnly {
        plan = Plan::Local;
        store.personal = vec![init; n];
        for (i, c) in clients.iter_mut().enumerate() {
            c.model_ref = ModelRef::Personal(i);
        }
    }

    let mut influence = None;
    let mut clustering = None;
    let mut influence_builds = 0;
    let mut logs = Vec::with_capacity(cfg.total_rounds);

    let mut first = 1;
    if cfg.method != Method::LocalOnly {
        let warm = cfg.warmup_rounds.min(cfg.total_rounds);
        logs = global_rounds(cfg, &mut store.global, &shards, seed, 1..=warm)?;
        first = warm + 1;
    }

    for round in first..=cfg.total_rounds {
        let phase = Phase::of_round(round, cfg.warmup_rounds);
        let rs = round_seed(seed, round);
        if phase == Phase::Clustering
            && matches!(cfg.method, Method::Oracle | Method::PfedliaCentral | Method::PfedliaP2p)
        {
            let theta0 = store.global.clone();
            let groups_plan = if cfg.method == Method::Oracle {
                Plan::Clusters(ClusterAssignment::from_clusters(&true_clusters).groups())
            } else if let Some(forced) = &opts.forced_assignment {
                Plan::Clusters(forced.with_noise_as_singletons().groups())
            } else {
                let (matrix, outcome) =
                    clustering_phase(cfg, &theta0, &shards, seed).map_err(|e| e.in_round(phase.name(), round))?;
                influence_builds += 1;
                let p = outcome.plan();
                influence = Some(matrix);
                clustering = Some(outcome);
                p
            };
            match &groups_plan {
                Plan::Clusters(groups) => {
                    store.clusters = vec![theta0; groups.len()];
                    for (c, members) in groups.iter().enumerate() {
                        for &i in members {
                            clients[i].model_ref = ModelRef::Cluster(c);
                        }
                    }
                }
                Plan::Peers(_) => {
                    store.personal = vec![theta0; n];
                    for (i, c) in clients.iter_mut().enumerate() {
                        c.model_ref = ModelRef::Personal(i);
                    }
                }
                Plan::Global | Plan::Local => unreachable!("clustering yields groups or peer sets"),
            }
            plan = groups_plan;
        }

        let everyone = || vec![(0..n).collect::<Vec<_>>()];
        let trained = match &plan {
            Plan::Global => run_round_clustered(cfg, std::slice::from_mut(&mut store.global), &everyone(), &shards, rs),
            Plan::Clusters(groups) => run_round_clustered(cfg, &mut store.clusters, groups, &shards, rs),
            Plan::Peers(sets) => run_round_peers(cfg, &mut store.personal, sets, &shards, rs),
            Plan::Local => run_round_local(cfg, &mut store.personal, &shards, rs),
        };
        trained.map_err(|e| e.in_round(phase.name(), round))?;

        let acc = accuracies(spec, &shards, |i| store.resolve(clients[i].model_ref))
            .map_err(|e| e.in_round(phase.name(), round))?;
        let sizes = match &plan {
            Plan::Global => vec![n],
            Plan::Clusters(groups) => groups.iter().map(Vec::len).collect(),
            Plan::Peers(sets) => sets.iter().map(Vec::len).collect(),
            Plan::Local => vec![1; n],
        };
        logs.push(RoundLog::new(round, phase, acc, sizes));
    }

    Ok(ExperimentRun {
        seed,
        logs,
        true_clusters,
        influence,
        clustering,
        influence_builds,
    })
}
