mod commands;
mod config;
mod export;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::PipelineConfig;

/// Coarse-grained PDE discovery from particle and agent simulations.
#[derive(Debug, Parser)]
#[command(name = "coarsen", version)]
pub struct Cli {
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stochastic particle runs; writes box densities, moments and the final ensemble.
    SimulateParticles(SimulateParticles),
    /// Finite-volume viscous Burgers reference.
    SimulateBurgers(SimulateBurgers),
    /// Complex Ginzburg-Landau reference.
    SimulateCgle(SimulateCgle),
    /// One-dimensional chart of box moment vectors; writes the chart and phi trajectories.
    EmbedDistributions(EmbedDistributions),
    /// Emergent coordinate of scrambled CGLE agents; writes resampled trajectories.
    EmbedTimeseries(EmbedTimeseries),
    /// Fits a neural right-hand side to one or more trajectories.
    TrainPde(TrainPde),
    /// Integrates a trained model forward.
    Rollout(Rollout),
    /// Compares a prediction with a reference; writes metrics JSON.
    Evaluate(Evaluate),
    /// Writes a trajectory as long-format CSV.
    ExportPlot(ExportPlot),
    /// Runs a complete experiment and writes its metrics.
    Pipeline(Pipeline),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DensityIc {
    /// 1 − cos(2z)/2.
    PaperFig1,
    /// Random sine sum, shifted and clipped positive.
    Random,
}

#[derive(Debug, Args)]
pub struct SimulateParticles {
    #[arg(long, value_enum, default_value = "paper-fig1")]
    pub ic: DensityIc,
    #[arg(long)]
    pub n_traj: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub resolution: Option<f64>,
    #[arg(long)]
    pub n_boxes: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "T", alias = "t-final")]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Highest box moment recorded per snapshot; 0 disables moments.
    #[arg(long)]
    pub moments: Option<usize>,
    #[arg(long, default_value = "particles")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct SimulateBurgers {
    #[arg(long, value_enum, default_value = "paper-fig1")]
    pub ic: DensityIc,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub n_cells: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "T", alias = "t-final")]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Cell count of the averaged output; 0 keeps the solver grid.
    #[arg(long)]
    pub average_to: Option<usize>,
    #[arg(long, default_value = "burgers")]
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CglePreset {
    /// Real front (1 + cos(πx/L))/2.
    Paper,
    /// Front plus seeded low-mode complex perturbation.
    Perturbed,
}

#[derive(Debug, Args)]
pub struct SimulateCgle {
    #[arg(long, value_enum, default_value = "paper")]
    pub preset: CglePreset,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "T", alias = "t-final")]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub sample_every: Option<usize>,
    #[arg(long, default_value = "cgle")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct EmbedDistributions {
    /// Particle run stems written by simulate-particles.
    #[arg(long, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Highest moment used; at most the number recorded.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_points: Option<usize>,
    #[arg(long, default_value = "chart")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct EmbedTimeseries {
    /// Complex trajectory whose agents define the chart.
    #[arg(long)]
    pub input: PathBuf,
    /// Further trajectories relabeled and resampled on the same chart.
    #[arg(long, num_args = 0..)]
    pub apply_to: Vec<PathBuf>,
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long)]
    pub scramble_seed: Option<u64>,
    #[arg(long)]
    pub n_grid: Option<usize>,
    #[arg(long, default_value = "emergent")]
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Burgers,
    Cgle,
}

#[derive(Debug, Args)]
pub struct TrainPde {
    #[arg(long, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Preset,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Half-width of a temporal moving average applied before featurizing.
    #[arg(long, default_value_t = 0)]
    pub smooth: usize,
    /// Train in single precision.
    #[arg(long)]
    pub f32: bool,
    #[arg(long, default_value = "model")]
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Periodic,
    Corridor,
}

#[derive(Debug, Args)]
pub struct Rollout {
    #[arg(long)]
    pub model: PathBuf,
    /// Trajectory providing the initial snapshot (and the corridor values).
    #[arg(long)]
    pub ic_from: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub snapshot: usize,
    #[arg(long, value_enum, default_value = "periodic")]
    pub boundary: BoundaryArg,
    #[arg(long)]
    pub corridor: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long, default_value = "rollout")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    #[arg(long)]
    pub prediction: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Mass chart; when given the prediction is mapped from phi to density.
    #[arg(long)]
    pub chart: Option<PathBuf>,
    /// Ordering report from embed-timeseries, merged into the metrics.
    #[arg(long)]
    pub ordering: Option<PathBuf>,
    #[arg(long, default_value = "metrics")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct ExportPlot {
    #[arg(long)]
    pub input: PathBuf,
    /// Second trajectory written side by side (same layout).
    #[arg(long)]
    pub compare: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub every: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Particle Burgers, learned PDE in the density chart.
    Burgers,
    /// Scrambled CGLE agents, learned PDE on the emergent coordinate.
    Emergent,
}

#[derive(Debug, Args)]
pub struct Pipeline {
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// Training seeds (Burgers reports the best).
    #[arg(long, num_args = 1.., default_values_t = [0u64, 1, 2])]
    pub train_seeds: Vec<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<coarsen::Error> for CliError {
    fn from(e: coarsen::Error) -> Self {
        use coarsen::Error as E;
        let msg = e.to_string();
        match e {
            E::Io { .. } | E::Json { .. } => CliError::Io(msg),
            E::Shape(_) | E::InvalidArgument(_) | E::NegativeDensity { .. } => {
                CliError::Config(msg)
            }
            E::NonFinite { .. }
            | E::Cfl { .. }
            | E::BlowUp { .. }
            | E::DisconnectedKernel { .. }
            | E::NotOneDimensional { .. }
            | E::DuplicateCoordinate { .. }
            | E::NonFiniteLoss { .. } => CliError::Numerical(msg),
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("COARSEN_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("COARSEN_THREADS={v} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    config::set!(cfg.output_dir, cli.out);
    config::set!(cfg.seed, cli.seed);
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", cfg.output_dir.display())))?;
    match cli.command {
        Command::SimulateParticles(a) => commands::simulate_particles(&mut cfg, a),
        Command::SimulateBurgers(a) => commands::simulate_burgers(&mut cfg, a),
        Command::SimulateCgle(a) => commands::simulate_cgle(&mut cfg, a),
        Command::EmbedDistributions(a) => commands::embed_distributions(&mut cfg, a),
        Command::EmbedTimeseries(a) => commands::embed_timeseries(&mut cfg, a),
        Command::TrainPde(a) => commands::train_pde(&mut cfg, a),
        Command::Rollout(a) => commands::rollout(&mut cfg, a),
        Command::Evaluate(a) => commands::evaluate(&cfg, a),
        Command::ExportPlot(a) => export::export_plot(a),
        Command::Pipeline(a) => commands::pipeline(&mut cfg, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
