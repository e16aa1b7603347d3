//! CSV formatting and seed aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::orchestrator::RoundLog;

/// Formats a float with 17 significant digits so that the text round-trips
/// to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub const ROUNDS_HEADER: &str =
    "seed,round,phase,mean_accuracy,std_accuracy,num_clusters,cluster_sizes,per_client_accuracy";

/// Rows of `rounds.csv` for one seed. List-valued columns are `;`-separated.
pub fn rounds_rows(seed: u64, logs: &[RoundLog]) -> String {
    let mut out = String::new();
    for log in logs {
        let sizes: Vec<String> = log.per_cluster_sizes.iter().map(|s| s.to_string()).collect();
        let accs: Vec<String> = log.per_client_accuracy.iter().map(|a| fmt_f64(*a)).collect();
        let _ = writeln!(
            out,
            "{seed},{},{},{},{},{},{},{}",
            log.round,
            log.phase.name(),
            fmt_f64(log.mean_accuracy),
            fmt_f64(log.std_accuracy),
            log.per_cluster_sizes.len(),
            sizes.join(";"),
            accs.join(";")
        );
    }
    out
}

/// Full `rounds.csv` with rows sorted by seed, then round.
pub fn rounds_csv(per_seed: &[(u64, Vec<RoundLog>)]) -> String {
    let mut sorted: Vec<&(u64, Vec<RoundLog>)> = per_seed.iter().collect();
    sorted.sort_by_key(|(s, _)| *s);
    let mut out = format!("{ROUNDS_HEADER}\n");
    for (seed, logs) in sorted {
        out.push_str(&rounds_rows(*seed, logs));
    }
    out
}

/// Mean and spread of final accuracies across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub dataset: String,
    pub partition: String,
    pub mean_accuracy: f64,
    /// Sample standard deviation (n − 1); 0 when only one seed ran.
    pub std_accuracy: f64,
    pub num_seeds: usize,
}

pub const SUMMARY_HEADER: &str = "method,dataset,partition,mean_accuracy,std_accuracy,num_seeds";

impl SummaryRow {
    /// True when the spread is a placeholder because only one seed ran.
    pub fn single_seed(&self) -> bool {
        self.num_seeds == 1
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.method,
            self.dataset,
            self.partition,
            fmt_f64(self.mean_accuracy),
            fmt_f64(self.std_accuracy),
            self.num_seeds
        )
    }
}

/// Mean and sample standard deviation of the final-round mean accuracies.
/// Returns `None` for an empty slice.
pub fn mean_std(finals: &[f64]) -> Option<(f64, f64)> {
    let n = finals.len();
    if n == 0 {
        return None;
    }
    let mean = finals.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let var = finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Some((mean, var.sqrt()))
}

/// Builds the summary row from each seed's round logs (last round counts).
pub fn aggregate_seeds(
    method: &str,
    dataset: &str,
    partition: &str,
    per_seed_logs: &[Vec<RoundLog>],
) -> Option<SummaryRow> {
    let finals: Vec<f64> = per_seed_logs
        .iter()
        .map(|logs| logs.last().map(|l| l.mean_accuracy))
        .collect::<Option<_>>()?;
    let (mean, std) = mean_std(&finals)?;
    Some(SummaryRow {
        method: method.to_string(),
        dataset: dataset.to_string(),
        partition: partition.to_string(),
        mean_accuracy: mean,
        std_accuracy: std,
        num_seeds: finals.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::Phase;

    fn log(round: usize, accs: Vec<f64>) -> RoundLog {
        RoundLog::new(round, Phase::Warmup, accs, vec![3])
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.25, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn one_seed_has_zero_std() {
        assert_eq!(mean_std(&[0.7]), Some((0.7, 0.0)));
        let row = aggregate_seeds("fedavg", "synthetic", "iid", &[vec![log(1, vec![0.7])]]).unwrap();
        assert!(row.single_seed());
    }

    #[test]
    fn two_seeds() {
        let (m, s) = mean_std(&[0.8, 0.9]).unwrap();
        assert!((m - 0.85).abs() < 1e-12);
        assert!((s - 0.0707106781).abs() < 1e-9);
    }

    #[test]
    fn equal_finals() {
        assert_eq!(mean_std(&[0.6; 4]).unwrap().1, 0.0);
        assert_eq!(mean_std(&[]), None);
    }

    #[test]
    fn final_round_is_used() {
        let seeds = vec![
            vec![log(1, vec![0.1]), log(2, vec![0.8])],
            vec![log(1, vec![0.2]), log(2, vec![0.9])],
        ];
        let row = aggregate_seeds("oracle", "synthetic", "pathological", &seeds).unwrap();
        assert!((row.mean_accuracy - 0.85).abs() < 1e-12);
        assert_eq!(row.num_seeds, 2);
        assert!(row.csv_line().starts_with("oracle,synthetic,pathological,"));
        assert!(row.csv_line().ends_with(",2"));
    }

    #[test]
    fn rounds_sorted_by_seed() {
        let csv = rounds_csv(&[(3, vec![log(1, vec![0.5, 1.0])]), (1, vec![log(1, vec![1.0])])]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], ROUNDS_HEADER);
        assert!(lines[1].starts_with("1,1,warmup,"));
        assert!(lines[2].starts_with("3,1,warmup,7.5000000000000000e-1,2.5000000000000000e-1,1,3,"));
    }
}
