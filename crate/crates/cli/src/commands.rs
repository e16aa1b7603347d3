use std::fmt::Write as _;
use std::path::PathBuf;

use pfedlia::clustering::{adjusted_rand_index, profile_csv, ClusterAssignment, PeerChoice, NOISE};
use pfedlia::config::ExperimentConfig;
use pfedlia::influence::{speedup_benchmark, speedup_csv, InfluenceMatrix};
use pfedlia::orchestrator::{build_shards, clustering_phase, run_experiment, run_warmup, ClusteringOutcome};
use pfedlia::report::{aggregate_seeds, fmt_f64, rounds_csv, SUMMARY_HEADER};

use crate::manifest::{load_experiment, load_scenario, RunManifest};
use crate::staging::Staging;
use crate::{BenchArgs, CliError, RunArgs};

pub const CLUSTERS_HEADER: &str = "client_id,true_cluster,cluster";
pub const PEERS_HEADER: &str = "client_id,frontier,degenerate,beneficial";

fn resolve(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = load_experiment(&args.config)?;
    if let Some(seeds) = &args.seed {
        cfg.seeds = seeds.0.clone();
        cfg.validate()?;
    }
    Ok(cfg)
}

/// `client_id,true_cluster,cluster`; `cluster` is `-1` when peer sets do not
/// form a partition.
pub fn clusters_csv(true_clusters: &[usize], assignment: Option<&ClusterAssignment>) -> String {
    let mut out = format!("{CLUSTERS_HEADER}\n");
    for (i, t) in true_clusters.iter().enumerate() {
        let c = assignment.map_or(NOISE, |a| a.labels()[i]);
        let _ = writeln!(out, "{i},{t},{c}");
    }
    out
}

pub fn peers_csv(choices: &[PeerChoice]) -> String {
    let mut out = format!("{PEERS_HEADER}\n");
    for (i, c) in choices.iter().enumerate() {
        let set: Vec<String> = c.beneficial.iter().map(|j| j.to_string()).collect();
        let _ = writeln!(out, "{i},{},{},{}", fmt_f64(c.frontier), c.degenerate, set.join(";"));
    }
    out
}

/// Writes the per-seed clustering artifacts and returns the ARI against the
/// true clusters when the outcome is a partition.
fn stage_clustering(
    stage: &mut Staging,
    seed: u64,
    true_clusters: &[usize],
    matrix: &InfluenceMatrix,
    outcome: &ClusteringOutcome,
) -> Result<Option<f64>, CliError> {
    let dir = format!("seed_{seed}");
    stage.write(&format!("{dir}/influence_matrix.csv"), &matrix.to_csv())?;
    stage.write(
        &format!("{dir}/clusters.csv"),
        &clusters_csv(true_clusters, outcome.assignment()),
    )?;
    match outcome {
        ClusteringOutcome::Central { profile, optics, .. } => {
            stage.write(&format!("{dir}/reachability.csv"), &profile_csv(profile, optics))?
        }
        ClusteringOutcome::Peer { choices, .. } => stage.write(&format!("{dir}/peers.csv"), &peers_csv(choices))?,
    }
    let truth = ClusterAssignment::from_clusters(true_clusters);
    Ok(match outcome.assignment() {
        Some(a) => Some(adjusted_rand_index(&truth, a)?),
        None => None,
    })
}

fn finish(
    stage: Staging,
    command: &str,
    snapshot: &impl serde::Serialize,
    seeds: Vec<u64>,
) -> Result<Vec<PathBuf>, CliError> {
    let mut stage = stage;
    let mut artifacts = stage.files().to_vec();
    artifacts.push("manifest.json".to_string());
    let manifest = RunManifest::new(command, snapshot, seeds, artifacts);
    stage.write("manifest.json", &manifest.to_json())?;
    Ok(stage.commit()?)
}

pub fn run(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = resolve(args)?;
    let mut stage = Staging::new(&args.out)?;
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let run = run_experiment(&cfg, seed).map_err(|e| CliError::from(e).for_seed(seed))?;
        if let (Some(matrix), Some(outcome)) = (&run.influence, &run.clustering) {
            stage_clustering(&mut stage, seed, &run.true_clusters, matrix, outcome)?;
        }
        if let Some(last) = run.logs.last() {
            say!("seed {seed}: final mean accuracy {:.4}", last.mean_accuracy);
        }
        per_seed.push((seed, run.logs));
    }
    stage.write("rounds.csv", &rounds_csv(&per_seed))?;
    let logs: Vec<_> = per_seed.into_iter().map(|(_, l)| l).collect();
    let summary = aggregate_seeds(cfg.method.name(), &cfg.data.name(), cfg.partition.scheme.name(), &logs)
        .ok_or_else(|| CliError::Runtime("no rounds were logged".into()))?;
    stage.write("summary.csv", &format!("{SUMMARY_HEADER}\n{}\n", summary.csv_line()))?;
    finish(stage, "run", &cfg, cfg.seeds.clone())
}

/// Runs only the warm-up and the clustering phase.
pub fn dump_clusters(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = resolve(args)?;
    if !cfg.method.is_pfedlia() {
        return Err(CliError::Config(format!(
            "dump-clusters needs a pfedlia method, config has {}",
            cfg.method.name()
        )));
    }
    let mut stage = Staging::new(&args.out)?;
    for &seed in &cfg.seeds {
        let step = || -> pfedlia::Result<_> {
            let parts = build_shards(&cfg, seed)?;
            let (theta0, _) = run_warmup(&cfg, &parts.shards, seed)?;
            let (matrix, outcome) = clustering_phase(&cfg, &theta0, &parts.shards, seed)?;
            Ok((parts.true_clusters(), matrix, outcome))
        };
        let (truth, matrix, outcome) = step().map_err(|e| CliError::from(e).for_seed(seed))?;
        match stage_clustering(&mut stage, seed, &truth, &matrix, &outcome)? {
            Some(ari) => say!(
                "seed {seed}: {} clusters, ARI {ari:.4}",
                outcome.assignment().map_or(0, |a| a.num_clusters())
            ),
            None => say!("seed {seed}: peer sets do not form a partition"),
        }
    }
    finish(stage, "dump-clusters", &cfg, cfg.seeds.clone())
}

pub fn bench_influence(args: &BenchArgs) -> Result<Vec<PathBuf>, CliError> {
    let scenario = load_scenario(args.config.as_deref())?;
    let mut stage = Staging::new(&args.out)?;
    let report = speedup_benchmark(&scenario)?;
    for row in &report.rows {
        say!(
            "threshold {:e}: lazy {:.3e}s, exact {:.3e}s ({} epochs{}), ratio {:.1}",
            row.threshold,
            row.lia_seconds,
            row.exact_seconds,
            row.exact_epochs,
            if row.converged { "" } else { ", epoch cap" },
            row.ratio
        );
    }
    stage.write("speedup.csv", &speedup_csv(&report.rows))?;
    finish(stage, "bench-influence", &scenario, vec![scenario.seed])
}
