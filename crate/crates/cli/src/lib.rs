//! Command-line front end: config loading, experiment runs and CSV output.
//!
//! Exit codes are 0 on success, 1 for bad arguments or configs and 2 when a
//! run fails. Outputs are staged and only appear in `--out` once a command
//! has finished; a failed command leaves the directory as it found it.

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

mod commands;
pub mod manifest;
mod staging;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{clusters_csv, peers_csv, CLUSTERS_HEADER, PEERS_HEADER};
pub use manifest::{load_experiment, load_scenario, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn for_seed(self, seed: u64) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("seed {seed}: {m}")),
            CliError::Runtime(m) => CliError::Runtime(format!("seed {seed}: {m}")),
        }
    }
}

impl From<pfedlia::Error> for CliError {
    fn from(e: pfedlia::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("writing outputs: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pfedlia",
    version,
    about = "Clustered personalized federated learning simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train every seed of an experiment and write rounds.csv and summary.csv.
    Run(RunArgs),
    /// Time lazy influence against retraining influence.
    BenchInfluence(BenchArgs),
    /// Stop after the clustering phase and write the influence matrices and clusters.
    DumpClusters(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated seeds replacing the config's list.
    #[arg(long, value_parser = parse_seeds)]
    pub seed: Option<SeedList>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark scenario; the built-in scenario when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Value of `--seed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<u64>()
                .map_err(|_| format!("`{part}` is not a non-negative integer"))
        })
        .collect::<Result<_, _>>()
        .map(SeedList)
}

/// Runs a parsed command and returns the files it wrote.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    match &cli.command {
        Command::Run(a) => commands::run(a),
        Command::BenchInfluence(a) => commands::bench_influence(a),
        Command::DumpClusters(a) => commands::dump_clusters(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                say!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
