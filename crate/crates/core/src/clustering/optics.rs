//! OPTICS ordering with an eps-cut extraction.

use serde::{Deserialize, Serialize};

use super::{ClusterAssignment, NOISE};
use crate::error::{Error, Result};

/// A split of the sorted reachability values only counts as a density break
/// when the mean of the high group is at least this many times the mean of
/// the low group.
pub const MIN_BREAK_RATIO: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsParams {
    #[serde(default = "default_min_pts")]
    pub min_pts: usize,
    /// Neighbourhood radius; `None` means unbounded.
    #[serde(default)]
    pub max_eps: Option<f64>,
    /// Fixed cut for cluster extraction; `None` picks one from the profile.
    #[serde(default)]
    pub extraction_eps: Option<f64>,
}

fn default_min_pts() -> usize {
    4
}

impl Default for OpticsParams {
    fn default() -> Self {
        OpticsParams {
            min_pts: default_min_pts(),
            max_eps: None,
            extraction_eps: None,
        }
    }
}

impl OpticsParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_pts < 2 {
            return Err(Error::config("optics.min_pts must be at least 2"));
        }
        if let Some(e) = self.max_eps {
            if !(e > 0.0) {
                return Err(Error::config("optics.max_eps must be positive"));
            }
        }
        if let Some(e) = self.extraction_eps {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::config("optics.extraction_eps must be a positive number"));
            }
        }
        Ok(())
    }

    fn radius(&self) -> f64 {
        self.max_eps.unwrap_or(f64::INFINITY)
    }
}

/// The OPTICS visit order and the reachability of each visited point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityProfile {
    /// Point indices in visit order.
    pub ordering: Vec<usize>,
    /// Reachability at each ordering position; `None` is "undefined" (start of
    /// a new connected region).
    pub reachability: Vec<Option<f64>>,
    /// Core distance per point index; `None` for non-core points.
    pub core_distances: Vec<Option<f64>>,
    /// The cut used to extract clusters.
    pub eps: f64,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Computes the OPTICS ordering. Among seeds with equal reachability the
/// lowest index is expanded first, and new regions start at the lowest
/// unprocessed index.
pub fn optics_ordering(
    points: &[Vec<f64>],
    params: &OpticsParams,
) -> Result<(Vec<usize>, Vec<Option<f64>>, Vec<Option<f64>>)> {
    params.validate()?;
    let n = points.len();
    if n < params.min_pts {
        return Err(Error::config(format!(
            "OPTICS needs at least min_pts = {} points, got {n}",
            params.min_pts
        )));
    }
    let radius = params.radius();
    let dist: Vec<Vec<f64>> = points
        .iter()
        .map(|p| points.iter().map(|q| euclidean(p, q)).collect())
        .collect();

    let core: Vec<Option<f64>> = dist
        .iter()
        .map(|row| {
            let mut within: Vec<f64> = row.iter().cloned().filter(|&d| d <= radius).collect();
            if within.len() < params.min_pts {
                return None;
            }
            within.sort_by(f64::total_cmp);
            // The point itself is the first neighbour.
            Some(within[params.min_pts - 1])
        })
        .collect();

    let mut processed = vec![false; n];
    let mut reach: Vec<Option<f64>> = vec![None; n];
    let mut ordering = Vec::with_capacity(n);
    let mut ordered_reach = Vec::with_capacity(n);

    let update = |p: usize, processed: &[bool], reach: &mut [Option<f64>]| {
        let Some(core_p) = core[p] else { return };
        for o in 0..n {
            if processed[o] || dist[p][o] > radius {
                continue;
            }
            let candidate = core_p.max(dist[p][o]);
            if reach[o].is_none_or(|r| candidate < r) {
                reach[o] = Some(candidate);
            }
        }
    };

    for start in 0..n {
        if processed[start] {
            continue;
        }
        let mut current = start;
        loop {
            processed[current] = true;
            ordering.push(current);
            ordered_reach.push(reach[current]);
            update(current, &processed, &mut reach);
            // Next seed: smallest reachability, lowest index on ties.
            let next = (0..n)
                .filter(|&o| !processed[o])
                .filter_map(|o| reach[o].map(|r| (r, o)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match next {
                Some((_, o)) => current = o,
                None => break,
            }
        }
    }
    Ok((ordering, ordered_reach, core))
}

/// Picks the extraction cut from the finite reachabilities.
///
/// The sorted values are split into a low group (steps inside clusters) and a
/// high group (jumps between clusters) at the break that minimizes the summed
/// within-group squared deviation. The cut is the midpoint of that break. It
/// is only accepted when the high group's mean is at least
/// [`MIN_BREAK_RATIO`] times the low group's mean; otherwise the cut sits at
/// the largest value and each connected region stays whole.
pub fn auto_eps(reachability: &[Option<f64>]) -> f64 {
    let mut values: Vec<f64> = reachability
        .iter()
        .flatten()
        .cloned()
        .filter(|v| v.is_finite())
        .collect();
    values.sort_by(f64::total_cmp);
    let Some(&max) = values.last() else { return 0.0 };
    let Some(k) = natural_break(&values) else { return max };
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (low, high) = (mean(&values[..k]), mean(&values[k..]));
    if high > 0.0 && high >= MIN_BREAK_RATIO * low {
        0.5 * (values[k - 1] + values[k])
    } else {
        max
    }
}

/// Index `k` of the first high value in the best two-group split of sorted
/// `values`; ties go to the lowest `k`.
fn natural_break(values: &[f64]) -> Option<usize> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mut prefix = vec![(0.0, 0.0); n + 1];
    for (i, &v) in values.iter().enumerate() {
        prefix[i + 1] = (prefix[i].0 + v, prefix[i].1 + v * v);
    }
    let sse = |a: usize, b: usize| {
        let (s, q) = (prefix[b].0 - prefix[a].0, prefix[b].1 - prefix[a].1);
        q - s * s / (b - a) as f64
    };
    (1..n)
        .map(|k| (sse(0, k) + sse(k, n), k))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, k)| k)
}

/// DBSCAN-equivalent cut of an OPTICS profile at `eps`.
pub fn extract_at(
    ordering: &[usize],
    reachability: &[Option<f64>],
    core: &[Option<f64>],
    eps: f64,
) -> ClusterAssignment {
    let mut labels = vec![NOISE; ordering.len()];
    let mut current = NOISE;
    let mut next_id = 0;
    for (&p, r) in ordering.iter().zip(reachability) {
        if r.is_none_or(|r| r > eps) {
            if core[p].is_some_and(|c| c <= eps) {
                current = next_id;
                next_id += 1;
                labels[p] = current;
            } else {
                labels[p] = NOISE;
            }
        } else {
            labels[p] = current;
        }
    }
    ClusterAssignment::from_labels(labels)
}

/// OPTICS plus extraction. Cluster ids are renumbered by lowest member index.
pub fn optics(points: &[Vec<f64>], params: &OpticsParams) -> Result<(ReachabilityProfile, ClusterAssignment)> {
    let (ordering, reachability, core_distances) = optics_ordering(points, params)?;
    let eps = params.extraction_eps.unwrap_or_else(|| auto_eps(&reachability));
    let assignment = extract_at(&ordering, &reachability, &core_distances, eps);
    Ok((
        ReachabilityProfile {
            ordering,
            reachability,
            core_distances,
            eps,
        },
        assignment,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::adjusted_rand_index;
    use crate::rng::rng_from;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn blob(center: &[f64], spread: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng_from(seed);
        (0..count)
            .map(|_| {
                center
                    .iter()
                    .map(|c| c + spread * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn two_blobs() {
        let mut pts = blob(&[0.0, 0.0], 0.1, 15, 1);
        pts.extend(blob(&[10.0, 10.0], 0.1, 15, 2));
        let (profile, a) = optics(&pts, &OpticsParams::default()).unwrap();
        assert_eq!(a.num_clusters(), 2);
        assert!(a.labels().iter().all(|&l| l != NOISE));
        assert!(a.labels()[..15].iter().all(|&l| l == 0));
        assert!(a.labels()[15..].iter().all(|&l| l == 1));
        assert_eq!(profile.reachability[0], None);
        let mut sorted = profile.ordering.clone();
        sorted.sort();
        assert_eq!(sorted, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = vec![vec![1.0, 2.0]; 7];
        let (_, a) = optics(&pts, &OpticsParams::default()).unwrap();
        assert_eq!(a.labels(), &[0; 7]);
    }

    #[test]
    fn far_outlier_is_noise() {
        let mut pts = blob(&[0.0, 0.0, 0.0], 0.2, 20, 3);
        pts.push(vec![50.0, 50.0, 50.0]);
        let (_, a) = optics(&pts, &OpticsParams::default()).unwrap();
        assert_eq!(a.labels()[20], NOISE);
        assert_eq!(a.num_clusters(), 1);
        assert!(a.labels()[..20].iter().all(|&l| l == 0));
    }

    #[test]
    fn too_few_points() {
        let err = optics(&vec![vec![0.0]; 3], &OpticsParams::default()).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn fixed_eps_matches_dbscan_reading() {
        let mut pts = blob(&[0.0], 0.05, 6, 4);
        pts.extend(blob(&[1.0], 0.05, 6, 5));
        let params = OpticsParams {
            extraction_eps: Some(5.0),
            ..OpticsParams::default()
        };
        assert_eq!(optics(&pts, &params).unwrap().1.num_clusters(), 1);
        let params = OpticsParams {
            extraction_eps: Some(0.5),
            ..OpticsParams::default()
        };
        assert_eq!(optics(&pts, &params).unwrap().1.num_clusters(), 2);
    }

    #[test]
    fn bounded_radius_isolates_regions() {
        let mut pts = blob(&[0.0, 0.0], 0.1, 8, 6);
        pts.extend(blob(&[5.0, 0.0], 0.1, 8, 7));
        let params = OpticsParams {
            max_eps: Some(1.0),
            ..OpticsParams::default()
        };
        let (profile, a) = optics(&pts, &params).unwrap();
        assert_eq!(profile.reachability.iter().filter(|r| r.is_none()).count(), 2);
        assert_eq!(a.num_clusters(), 2);
    }

    #[test]
    fn auto_eps_rules() {
        assert_eq!(
            auto_eps(&[None, Some(0.1), Some(0.12), Some(2.0), Some(0.11)]),
            0.5 * (0.12 + 2.0)
        );
        // jumps of uneven size between clusters: the cut goes below all of them
        let uneven = [
            None,
            Some(0.05),
            Some(0.06),
            Some(0.07),
            Some(0.6),
            Some(0.95),
            Some(1.4),
            Some(0.05),
        ];
        assert_eq!(auto_eps(&uneven), 0.5 * (0.07 + 0.6));
        // no clear break: keep everything together
        assert_eq!(auto_eps(&[None, Some(1.0), Some(1.2), Some(1.5)]), 1.5);
        assert_eq!(auto_eps(&[None]), 0.0);
    }

    #[test]
    fn shuffled_input_gives_same_partition() {
        let mut pts = blob(&[0.0, 0.0], 0.1, 10, 8);
        pts.extend(blob(&[6.0, 0.0], 0.1, 10, 9));
        pts.extend(blob(&[0.0, 6.0], 0.1, 10, 10));
        let (_, base) = optics(&pts, &OpticsParams::default()).unwrap();
        for seed in 0..10 {
            let mut perm: Vec<usize> = (0..30).collect();
            perm.shuffle(&mut rng_from(seed));
            let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
            let (_, a) = optics(&shuffled, &OpticsParams::default()).unwrap();
            let mut back = vec![0; 30];
            for (pos, &i) in perm.iter().enumerate() {
                back[i] = a.labels()[pos];
            }
            let back = ClusterAssignment::from_labels(back);
            assert_eq!(adjusted_rand_index(&base, &back).unwrap(), 1.0);
        }
    }

    #[test]
    fn deterministic() {
        let pts = blob(&[0.0, 0.0], 1.0, 25, 11);
        assert_eq!(
            optics(&pts, &OpticsParams::default()).unwrap(),
            optics(&pts, &OpticsParams::default()).unwrap()
        );
    }

    #[test]
    fn reachability_values_are_valid() {
        let mut rng = rng_from(12);
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let (profile, _) = optics(&pts, &OpticsParams::default()).unwrap();
        assert!(profile
            .reachability
            .iter()
            .flatten()
            .all(|r| r.is_finite() && *r >= 0.0));
    }
}
