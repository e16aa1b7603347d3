//! Splitting a labelled dataset across federated clients.
//!
//! The label-skew schemes work in three steps:
//!
//! 1. Sorted labels are dealt round-robin onto `num_clusters` clusters, and
//!    client `c` belongs to cluster `c % num_clusters`.
//! 2. Each label's examples are shuffled and cut into equal shards, one per
//!    client of the owning cluster (remainders go to the lowest client ids).
//! 3. Every client splits its examples 3:1 into train and validation.
//!
//! The noisy scheme additionally hands some clients examples of labels from
//! other clusters. Those examples come from a slice reserved off the top of the
//! label's pool, so no example is ever shared between two clients.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LabeledExample;
use crate::rng::{derive_seed, rng_from};

/// Fraction of a label's pool set aside for out-of-cluster (noisy) clients.
pub const NOISY_RESERVE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionScheme {
    Pathological,
    Noisy,
    Iid,
}

impl PartitionScheme {
    pub fn name(&self) -> &'static str {
        match self {
            PartitionScheme::Pathological => "pathological",
            PartitionScheme::Noisy => "noisy",
            PartitionScheme::Iid => "iid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub scheme: PartitionScheme,
    pub num_clusters: usize,
    pub num_clients: usize,
    pub noisy_extra_labels: usize,
    pub noisy_probability: f64,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn pathological(num_clusters: usize, num_clients: usize, seed: u64) -> Self {
        PartitionSpec {
            scheme: PartitionScheme::Pathological,
            num_clusters,
            num_clients,
            noisy_extra_labels: 1,
            noisy_probability: 0.5,
            seed,
        }
    }

    pub fn noisy(num_clusters: usize, num_clients: usize, seed: u64) -> Self {
        PartitionSpec {
            scheme: PartitionScheme::Noisy,
            ..Self::pathological(num_clusters, num_clients, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    pub client_id: usize,
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    /// Ground-truth group; only the Oracle baseline and evaluation read it.
    pub true_cluster: usize,
}

impl ClientShard {
    pub fn labels(&self) -> BTreeSet<usize> {
        self.train.iter().chain(&self.validation).map(|e| e.label).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    pub shards: Vec<ClientShard>,
    pub label_to_cluster: BTreeMap<usize, usize>,
}

impl PartitionResult {
    pub fn true_clusters(&self) -> Vec<usize> {
        self.shards.iter().map(|s| s.true_cluster).collect()
    }
}

/// Shuffles `examples` with `seed` and keeps the first three quarters
/// (rounded to nearest) for training.
pub fn split_train_val(
    mut examples: Vec<LabeledExample>,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    let n = examples.len();
    if n < 4 {
        return Err(Error::config(format!(
            "a client needs at least 4 examples for a 3:1 split, got {n}"
        )));
    }
    examples.shuffle(&mut rng_from(seed));
    let n_train = (3 * n + 2) / 4;
    let validation = examples.split_off(n_train);
    Ok((examples, validation))
}

/// Sizes of `m` nearly equal chunks of `n` items, larger chunks first.
fn even_chunks(n: usize, m: usize) -> impl Iterator<Item = usize> {
    (0..m).map(move |i| n / m + usize::from(i < n % m))
}

fn deal(items: &[usize], receivers: &[usize], out: &mut [Vec<usize>]) {
    let mut start = 0;
    for (&r, len) in receivers.iter().zip(even_chunks(items.len(), receivers.len())) {
        out[r].extend_from_slice(&items[start..start + len]);
        start += len;
    }
}

fn finish(
    data: &[LabeledExample],
    assigned: Vec<Vec<usize>>,
    clusters: &[usize],
    label_to_cluster: BTreeMap<usize, usize>,
    seed: u64,
) -> Result<PartitionResult> {
    let shards = assigned
        .into_iter()
        .enumerate()
        .map(|(client_id, idx)| {
            let examples = idx.iter().map(|&i| data[i].clone()).collect();
            let (train, validation) = split_train_val(examples, derive_seed(seed, "split", &[client_id as u64]))
                .map_err(|e| Error::config(format!("client {client_id}: {e}")))?;
            Ok(ClientShard {
                client_id,
                train,
                validation,
                true_cluster: clusters[client_id],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitionResult {
        shards,
        label_to_cluster,
    })
}

fn sorted_labels(data: &[LabeledExample]) -> Vec<usize> {
    data.iter()
        .map(|e| e.label)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn check_common(spec: &PartitionSpec) -> Result<()> {
    if spec.num_clusters == 0 {
        return Err(Error::config("num_clusters must be positive"));
    }
    if spec.num_clients < spec.num_clusters {
        return Err(Error::config(format!(
            "{} clients cannot fill {} clusters",
            spec.num_clients, spec.num_clusters
        )));
    }
    Ok(())
}

/// Label-skew core shared by the pathological and noisy schemes. `extras[c]`
/// lists the out-of-cluster labels client `c` receives.
fn label_partition(
    data: &[LabeledExample],
    spec: &PartitionSpec,
    labels: &[usize],
    extras: &[Vec<usize>],
) -> Result<PartitionResult> {
    let k = spec.num_clusters;
    let label_to_cluster: BTreeMap<usize, usize> = labels.iter().enumerate().map(|(p, &l)| (l, p % k)).collect();
    let clusters: Vec<usize> = (0..spec.num_clients).map(|c| c % k).collect();

    let mut pools: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, ex) in data.iter().enumerate() {
        pools.entry(ex.label).or_default().push(i);
    }

    let mut assigned = vec![Vec::new(); spec.num_clients];
    for (&label, pool) in pools.iter_mut() {
        pool.shuffle(&mut rng_from(derive_seed(spec.seed, "label-pool", &[label as u64])));
        let takers: Vec<usize> = (0..spec.num_clients).filter(|&c| extras[c].contains(&label)).collect();
        let reserved = if takers.is_empty() {
            0
        } else {
            (NOISY_RESERVE_FRACTION * pool.len() as f64).ceil() as usize
        };
        deal(&pool[..reserved], &takers, &mut assigned);
        let owner = label_to_cluster[&label];
        let members: Vec<usize> = (0..spec.num_clients).filter(|&c| clusters[c] == owner).collect();
        deal(&pool[reserved..], &members, &mut assigned);
    }
    finish(data, assigned, &clusters, label_to_cluster, spec.seed)
}

/// Gives every label to exactly one cluster of clients.
pub fn partition_pathological(data: &[LabeledExample], spec: &PartitionSpec) -> Result<PartitionResult> {
    check_common(spec)?;
    let labels = sorted_labels(data);
    if spec.num_clusters > labels.len() {
        return Err(Error::config(format!(
            "{} clusters need at least as many labels, data has {}",
            spec.num_clusters,
            labels.len()
        )));
    }
    label_partition(data, spec, &labels, &vec![Vec::new(); spec.num_clients])
}

/// Pathological partition where each client, with probability
/// `noisy_probability`, also receives `noisy_extra_labels` labels drawn
/// uniformly from outside its cluster.
pub fn partition_noisy(data: &[LabeledExample], spec: &PartitionSpec) -> Result<PartitionResult> {
    check_common(spec)?;
    if spec.noisy_extra_labels == 0 {
        return Err(Error::config("noisy partition needs noisy_extra_labels >= 1"));
    }
    if !(0.0..=1.0).contains(&spec.noisy_probability) {
        return Err(Error::config("noisy_probability must lie in [0, 1]"));
    }
    let labels = sorted_labels(data);
    if spec.num_clusters > labels.len() {
        return Err(Error::config(format!(
            "{} clusters need at least as many labels, data has {}",
            spec.num_clusters,
            labels.len()
        )));
    }
    let k = spec.num_clusters;
    let available = labels.len() - labels.len().div_ceil(k);
    if available < spec.noisy_extra_labels {
        return Err(Error::config(format!(
            "noisy partition wants {} out-of-cluster labels but only {available} exist",
            spec.noisy_extra_labels
        )));
    }

    let mut rng = rng_from(derive_seed(spec.seed, "noisy-draws", &[]));
    let extras: Vec<Vec<usize>> = (0..spec.num_clients)
        .map(|c| {
            let draw: f64 = rng.random();
            if draw >= spec.noisy_probability {
                return Vec::new();
            }
            let outside: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(p, _)| p % k != c % k)
                .map(|(_, &l)| l)
                .collect();
            let mut picked: Vec<usize> = outside
                .choose_multiple(&mut rng, spec.noisy_extra_labels)
                .cloned()
                .collect();
            picked.sort_unstable();
            picked
        })
        .collect();
    label_partition(data, spec, &labels, &extras)
}

/// Uniform random shards; every client is in cluster 0.
pub fn partition_iid(data: &[LabeledExample], spec: &PartitionSpec) -> Result<PartitionResult> {
    if spec.num_clients == 0 {
        return Err(Error::config("num_clients must be positive"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng_from(derive_seed(spec.seed, "iid", &[])));
    let mut assigned = vec![Vec::new(); spec.num_clients];
    for (pos, &i) in order.iter().enumerate() {
        assigned[pos % spec.num_clients].push(i);
    }
    let label_to_cluster = sorted_labels(data).into_iter().map(|l| (l, 0)).collect();
    finish(data, assigned, &vec![0; spec.num_clients], label_to_cluster, spec.seed)
}

/// Dispatches on `spec.scheme`.
pub fn partition(data: &[LabeledExample], spec: &PartitionSpec) -> Result<PartitionResult> {
    match spec.scheme {
        PartitionScheme::Pathological => partition_pathological(data, spec),
        PartitionScheme::Noisy => partition_noisy(data, spec),
        PartitionScheme::Iid => partition_iid(data, spec),
    }
}

/// Partitions group-tagged data (see
/// [`generate_feature_shifted`](super::generate_feature_shifted)): client `c`
/// joins group `c % num_groups` and receives an equal share of that group's
/// examples. `label_to_cluster` is empty because every group sees every label.
pub fn partition_feature_groups(
    data: &[(usize, LabeledExample)],
    num_clients: usize,
    seed: u64,
) -> Result<PartitionResult> {
    let groups: BTreeSet<usize> = data.iter().map(|(g, _)| *g).collect();
    let num_groups = groups.len();
    if num_groups == 0 || groups.iter().next_back() != Some(&(num_groups - 1)) {
        return Err(Error::config("feature groups must be numbered 0..G without gaps"));
    }
    if num_clients < num_groups {
        return Err(Error::config(format!(
            "{num_clients} clients cannot fill {num_groups} groups"
        )));
    }
    let examples: Vec<LabeledExample> = data.iter().map(|(_, e)| e.clone()).collect();
    let clusters: Vec<usize> = (0..num_clients).map(|c| c % num_groups).collect();
    let mut assigned = vec![Vec::new(); num_clients];
    for g in 0..num_groups {
        let mut pool: Vec<usize> = (0..data.len()).filter(|&i| data[i].0 == g).collect();
        pool.shuffle(&mut rng_from(derive_seed(seed, "group-pool", &[g as u64])));
        let members: Vec<usize> = (0..num_clients).filter(|&c| clusters[c] == g).collect();
        deal(&pool, &members, &mut assigned);
    }
    finish(&examples, assigned, &clusters, BTreeMap::new(), seed)
}
