//! Grouping clients from their influence scores.
//!
//! The centralized path normalizes every row of the influence matrix and runs
//! OPTICS over the rows. The peer-to-peer path lets each client split its own
//! row into a beneficial and a non-beneficial group with 1-D two-means.

mod ari;
mod kmeans;
mod optics;

use std::fmt::Write as _;

pub use ari::adjusted_rand_index;
pub use kmeans::{kmeans_two, TwoMeans};
pub use optics::{auto_eps, extract_at, optics, optics_ordering, OpticsParams, ReachabilityProfile, MIN_BREAK_RATIO};

use crate::error::{Error, Result};
use crate::influence::InfluenceMatrix;
use crate::report::fmt_f64;

/// Label of a point that belongs to no cluster.
pub const NOISE: isize = -1;

const ROW_EPS: f64 = 1e-12;

/// Cluster id per client, with ids numbered `0..k` in order of each
/// cluster's lowest member index. [`NOISE`] marks unclustered clients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<isize>,
    num_clusters: usize,
}

impl ClusterAssignment {
    /// Renumbers arbitrary labels; any negative label is noise.
    pub fn from_labels(raw: Vec<isize>) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels: Vec<isize> = raw
            .into_iter()
            .map(|l| {
                if l < 0 {
                    NOISE
                } else {
                    let next = map.len() as isize;
                    *map.entry(l).or_insert(next)
                }
            })
            .collect();
        ClusterAssignment {
            labels,
            num_clusters: map.len(),
        }
    }

    /// Assignment from ground-truth cluster ids.
    pub fn from_clusters(ids: &[usize]) -> Self {
        Self::from_labels(ids.iter().map(|&c| c as isize).collect())
    }

    pub fn labels(&self) -> &[isize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distinct non-noise ids.
    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Each noise point becomes its own cluster.
    pub fn with_noise_as_singletons(&self) -> Self {
        let mut next = self.num_clusters as isize;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if l == NOISE {
                    next += 1;
                    next - 1
                } else {
                    l
                }
            })
            .collect();
        Self::from_labels(labels)
    }

    /// Members of each cluster, ascending, indexed by cluster id. Noise is left out.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != NOISE {
                groups[l as usize].push(i);
            }
        }
        groups
    }
}

/// Rows of the matrix scaled to unit Euclidean norm (all-zero rows stay zero).
pub fn row_features(matrix: &InfluenceMatrix) -> Vec<Vec<f64>> {
    matrix
        .rows()
        .map(|row| {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(ROW_EPS);
            row.iter().map(|v| v / norm).collect()
        })
        .collect()
}

/// OPTICS over the normalized rows.
pub fn cluster_centralized(
    matrix: &InfluenceMatrix,
    params: &OpticsParams,
) -> Result<(ReachabilityProfile, ClusterAssignment)> {
    params.validate()?;
    optics(&row_features(matrix), params)
}

/// A client's split of its own score row.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerChoice {
    /// Clients to aggregate with, ascending; always contains the client itself.
    pub beneficial: Vec<usize>,
    pub frontier: f64,
    pub degenerate: bool,
}

/// Two-means over `row`, with `self_index` forced into the beneficial set.
///
/// Scores are floored at zero first. A peer with negative influence is not
/// beneficial however strongly it hurts, so the spread among harmful peers
/// must not decide where the frontier goes.
pub fn cluster_peer(row: &[f64], self_index: usize, seed: u64) -> Result<PeerChoice> {
    if self_index >= row.len() {
        return Err(Error::dim(format!(
            "client {self_index} is outside a row of {}",
            row.len()
        )));
    }
    let floored: Vec<f64> = row.iter().map(|v| v.max(0.0)).collect();
    let split = kmeans_two(&floored, seed)?;
    let mut beneficial = split.beneficial;
    if let Err(pos) = beneficial.binary_search(&self_index) {
        beneficial.insert(pos, self_index);
    }
    Ok(PeerChoice {
        beneficial,
        frontier: split.frontier,
        degenerate: split.degenerate,
    })
}

pub const PROFILE_HEADER: &str = "order_pos,client_id,reachability,cluster";

/// Reachability profile and assignment in visit order. Undefined
/// reachability is written as `inf`.
pub fn profile_csv(profile: &ReachabilityProfile, assignment: &ClusterAssignment) -> String {
    let mut out = String::from(PROFILE_HEADER);
    out.push('\n');
    for (pos, (&client, r)) in profile.ordering.iter().zip(&profile.reachability).enumerate() {
        let reach = r.map_or_else(|| "inf".to_string(), fmt_f64);
        let _ = writeln!(out, "{pos},{client},{reach},{}", assignment.labels()[client]);
    }
    out
}
