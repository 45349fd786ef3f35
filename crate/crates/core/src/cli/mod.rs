//! Command-line front end: `train`, `analyze`, `ising`, `maxent`, `kmeans`
//! and `report`. Every subcommand writes its files into one output directory
//! together with a `run_manifest.json`.
//!
//! Exit codes: 0 success, 2 usage or configuration error (including missing
//! input files), 3 numeric failure, 4 I/O error while writing outputs.

mod commands;
pub mod config;
pub mod output;
pub mod pipeline;

pub use commands::{IsingJob, ISING_DEFAULT_SEED};
pub use config::{preset, AnalysisConfig, ExperimentConfig, ModelSpec, PRESETS, THRESHOLD_SWEEP};

use crate::baselines::KMeansError;
use crate::datasets::DatasetError;
use crate::infostats::InfoError;
use crate::maxent::MaxEntError;
use crate::models::ModelError;
use crate::representation::RepresentationError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match &e {
            DatasetError::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match &e {
            ModelError::NonFiniteLoss { .. } => {
                CliError::Numeric(format!("training diverged: {e}"))
            }
            ModelError::Io(io) if io.kind() != std::io::ErrorKind::NotFound => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<InfoError> for CliError {
    fn from(e: InfoError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<RepresentationError> for CliError {
    fn from(e: RepresentationError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MaxEntError> for CliError {
    fn from(e: MaxEntError) -> Self {
        match e {
            MaxEntError::InvalidProblem(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<KMeansError> for CliError {
    fn from(e: KMeansError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "critrep",
    version,
    about = "Frequency statistics of binarized neural representations"
)]
pub struct Cli {
    /// Worker threads; 1 gives bit-exact reproducible output.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoints and per-epoch metrics.
    Train(TrainArgs),
    /// Binarize hidden layers of a checkpoint and analyse their code spectra.
    Analyze(AnalyzeArgs),
    /// Generate equilibrium Ising patterns as IDX files.
    Ising(IsingArgs),
    /// Solve the max-entropy cluster-size problem and check the power law.
    Maxent(MaxentArgs),
    /// k-means baseline and its cluster-size spectrum.
    Kmeans(KmeansArgs),
    /// Summarise the outputs of earlier runs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment config (JSON).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Shipped config by name: rbm-mnist, mlp-mnist, autoencoder-mnist,
    /// ising-ae-low, ising-ae-critical, ising-ae-high.
    #[arg(long)]
    pub preset: Option<String>,
    /// Dataset name in the manifest.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub test_dataset: Option<String>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Snapshot epochs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<usize>>,
    #[arg(long)]
    pub stop_at_accuracy: Option<f64>,
    /// Print the resolved config and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Layers to analyse, comma separated; 0 is the binarized input.
    #[arg(long, value_delimiter = ',', conflicts_with = "all_layers")]
    pub layer: Option<Vec<usize>>,
    /// Analyse every hidden layer.
    #[arg(long)]
    pub all_layers: bool,
    #[arg(long, value_delimiter = ',', conflicts_with = "threshold_sweep")]
    pub threshold: Option<Vec<f64>>,
    /// Thresholds 0.3, 0.4, 0.5, 0.6, 0.7.
    #[arg(long)]
    pub threshold_sweep: bool,
    #[arg(long, conflicts_with = "no_labels")]
    pub labels: bool,
    #[arg(long)]
    pub no_labels: bool,
    #[arg(long)]
    pub k_cutoff: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IsingPresetArg {
    Low,
    Critical,
    High,
    All,
}

#[derive(Debug, Args)]
pub struct IsingArgs {
    #[arg(long, value_enum, conflicts_with = "temperature")]
    pub preset: Vec<IsingPresetArg>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long, default_value_t = 50_000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub side: usize,
    #[arg(long, default_value_t = ISING_DEFAULT_SEED)]
    pub seed: u64,
    /// Independent Markov chains; the output depends on this but not on --threads.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 10_000)]
    pub sweeps_equilibrate: usize,
    #[arg(long, default_value_t = 10)]
    pub sweeps_between: usize,
    #[arg(long)]
    pub free_boundary: bool,
    #[arg(long, default_value = "data/ising")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MaxentArgs {
    #[arg(
        long,
        conflicts_with = "resolution",
        required_unless_present = "resolution"
    )]
    pub beta: Option<f64>,
    /// Target resolution H(Z) in nats; β is solved for.
    #[arg(long)]
    pub resolution: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub k_max: usize,
    /// Sample count M.
    #[arg(long, default_value_t = 10_000.0)]
    pub m: f64,
    #[arg(long, default_value = "runs/maxent")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KmeansArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long, default_value_t = crate::baselines::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directories of earlier runs.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Also write the collected summaries as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let threads = cli.threads;
    pool.install(|| match cli.command {
        Command::Train(a) => commands::train(a, threads),
        Command::Analyze(a) => commands::analyze(a, threads),
        Command::Ising(a) => commands::ising(a, threads),
        Command::Maxent(a) => commands::maxent(a, threads),
        Command::Kmeans(a) => commands::kmeans(a, threads),
        Command::Report(a) => commands::report(a),
    })
}
