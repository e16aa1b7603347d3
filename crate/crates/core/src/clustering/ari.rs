use std::collections::HashMap;

use super::{ClusterAssignment, NOISE};
use crate::error::{Error, Result};

fn pairs(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Group keys for ARI: noise points become singletons.
fn keys(a: &ClusterAssignment) -> Vec<i64> {
    a.labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| if l == NOISE { -1 - i as i64 } else { l as i64 })
        .collect()
}

/// Adjusted Rand index between two assignments of the same points. Noise
/// points count as singleton clusters. When the index is undefined (both
/// sides trivially all-together or all-apart) it is 1.0 for identical
/// partitions and 0.0 otherwise.
pub fn adjusted_rand_index(a: &ClusterAssignment, b: &ClusterAssignment) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(format!(
            "cannot compare assignments of {} and {} points",
            a.len(),
            b.len()
        )));
    }
    let (ka, kb) = (keys(a), keys(b));
    let mut table: HashMap<(i64, i64), usize> = HashMap::new();
    let mut rows: HashMap<i64, usize> = HashMap::new();
    let mut cols: HashMap<i64, usize> = HashMap::new();
    for (&x, &y) in ka.iter().zip(&kb) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(a.len());
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        let same = table.len() == rows.len() && table.len() == cols.len();
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    fn asg(labels: &[isize]) -> ClusterAssignment {
        ClusterAssignment::from_labels(labels.to_vec())
    }

    /// Pair-counting oracle: enumerate all pairs and tally agreements.
    fn brute_force(a: &[i64], b: &[i64]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut neither) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => both += 1.0,
                    (true, false) => only_a += 1.0,
                    (false, true) => only_b += 1.0,
                    (false, false) => neither += 1.0,
                }
            }
        }
        let total = both + only_a + only_b + neither;
        let expected = (both + only_a) * (both + only_b) / total;
        let max = 0.5 * ((both + only_a) + (both + only_b));
        (both - expected) / (max - expected)
    }

    #[test]
    fn identical_up_to_relabeling() {
        let a = asg(&[0, 0, 1, 1, 2]);
        let b = ClusterAssignment::from_labels(vec![5, 5, 3, 3, 9]);
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn one_cluster_versus_singletons() {
        let a = asg(&[0, 0, 0, 0]);
        let b = asg(&[0, 1, 2, 3]);
        // index 0, row pairs 6, column pairs 0 → expected 0, max 3 → ARI 0
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 0.0);
        assert_eq!(brute_force(&keys(&a), &keys(&b)), 0.0);
        assert_eq!(adjusted_rand_index(&b, &b).unwrap(), 1.0);
    }

    #[test]
    fn matches_pair_counting() {
        let cases: [(&[isize], &[isize]); 3] = [
            (&[0, 0, 1, 1], &[0, 1, 1, 1]),
            (&[0, 0, 0, 1, 1, 2], &[0, 0, 1, 1, 2, 2]),
            (&[0, 1, 0, 1, 0, 1, 2], &[0, 0, 0, 1, 1, 1, 1]),
        ];
        for (x, y) in cases {
            let got = adjusted_rand_index(&asg(x), &asg(y)).unwrap();
            let want = brute_force(&keys(&asg(x)), &keys(&asg(y)));
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        // contingency [[1,1],[0,2]]: index 1, expected 2·3/6 = 1 → ARI 0
        assert_eq!(
            adjusted_rand_index(&asg(&[0, 0, 1, 1]), &asg(&[0, 1, 1, 1])).unwrap(),
            0.0
        );
    }

    #[test]
    fn noise_counts_as_singletons() {
        let a = asg(&[0, 0, NOISE, NOISE]);
        let b = asg(&[0, 0, 1, 2]);
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(adjusted_rand_index(&asg(&[0, 1]), &asg(&[0])).is_err());
    }

    #[test]
    fn random_partitions_are_near_zero() {
        let mut rng = rng_from(0);
        let mut total = 0.0;
        for _ in 0..20 {
            let a: Vec<isize> = (0..2000).map(|_| rng.random_range(0..5i64) as isize).collect();
            let b: Vec<isize> = (0..2000).map(|_| rng.random_range(0..5i64) as isize).collect();
            let v = adjusted_rand_index(&asg(&a), &asg(&b)).unwrap();
            assert!(v.abs() < 0.01, "{v}");
            total += v;
        }
        assert!((total / 20.0).abs() < 0.005);
    }
}
