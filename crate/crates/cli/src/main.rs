//! Command-line front end for cohort harmonic analysis.
//!
//! Five workflows: `learn` fits the common harmonic frame of a network
//! cohort, `analyze` runs group statistics of node signals under a frame,
//! `replicability` compares the resampling stability of the manifold mean
//! against the averaged-network baseline, `pselect` reports reconstruction
//! error against truncation order, and `synthetic` runs the rotation
//! averaging experiment. Inputs and outputs are the plain-text formats of
//! the library's io module plus JSON summaries.
//!
//! Each failure class has its own exit code so scripts can tell malformed
//! input from convergence trouble: 0 success, 1 i/o, 2 usage, 3 parse,
//! 4 validation, 5 convergence (an iteration cap or a numerical kernel;
//! learn still writes its outputs when only the cap was hit), 6 the
//! synthetic comparison failed its criterion.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use harmonics::{AxisMode, Error, SolverConfig};
use nalgebra::Vector3;

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;
pub const EXIT_CONVERGENCE: u8 = 5;
pub const EXIT_ACCEPTANCE: u8 = 6;

/// A command failure carrying the exit code of its class.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure::new(classify(&error), error.to_string())
    }
}

/// Exit-code class of a library error. Subject tags are transparent:
/// a parse failure stays a parse failure when wrapped with the subject id.
fn classify(error: &Error) -> u8 {
    match error {
        Error::Io { .. } => EXIT_IO,
        Error::Parse { .. } | Error::DuplicateSubject(_) => EXIT_PARSE,
        Error::InvalidConfig(_) | Error::EmptyCohort => EXIT_USAGE,
        Error::StepFailure { .. } | Error::EigenFailure { .. } | Error::SvdFailure { .. } => {
            EXIT_CONVERGENCE
        }
        Error::Subject { source, .. } => classify(source),
        _ => EXIT_VALIDATION,
    }
}

#[derive(Parser)]
#[command(
    name = "harmonics",
    version,
    about = "Common harmonic waves of graph cohorts",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for the parallel loops; 0 uses every core.
    /// Runs with the same inputs and --threads 1 are bit-identical.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the common harmonic frame of a cohort of networks
    Learn(LearnArgs),
    /// Group statistics of node signals under a harmonic frame
    Analyze(AnalyzeArgs),
    /// Resampling stability of the learned frame against the
    /// averaged-network baseline
    Replicability(ReplicabilityArgs),
    /// Reconstruction error against truncation order, with a suggested p
    Pselect(PselectArgs),
    /// Rotation averaging: manifold mean versus arithmetic mean
    Synthetic(SyntheticArgs),
}

/// Solver settings shared by the commands that fit frames.
#[derive(Args, Debug)]
pub struct SolverArgs {
    /// Number of harmonics to learn; defaults to min(60, n)
    #[arg(long)]
    pub p: Option<usize>,

    /// Coupling weight between spectral fit and frame agreement
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,

    /// Mean-update step size; the composite scale is gamma * lambda
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,

    /// Per-subject refinement stopping tolerance
    #[arg(long, value_name = "EPS", default_value_t = 1e-8)]
    pub eps1: f64,

    /// Mean-update stopping tolerance
    #[arg(long, value_name = "EPS", default_value_t = 1e-6)]
    pub eps2: f64,

    /// Outer-loop cost-change stopping tolerance
    #[arg(long, value_name = "EPS", default_value_t = 1e-6)]
    pub eps_outer: f64,

    /// Outer-loop iteration cap
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,

    /// Run the unsafeguarded variant of the update schedule for
    /// reproduction studies: the mean update restarts from the first
    /// subject's frame, skips the tangent projection, and takes fixed
    /// steps with no backtracking
    #[arg(long)]
    pub strict_paper: bool,
}

impl SolverArgs {
    pub fn config(&self, n: usize) -> SolverConfig {
        let mut config = SolverConfig::new(self.p.unwrap_or(n.min(60)));
        config.lambda = self.lambda;
        config.gamma = self.gamma;
        config.eps_gpi = self.eps1;
        config.eps_weiszfeld = self.eps2;
        config.eps_outer = self.eps_outer;
        config.max_outer_iters = self.max_iters;
        config.strict = self.strict_paper;
        config
    }
}

#[derive(Args)]
pub struct LearnArgs {
    /// Cohort manifest of `subject, path, group` lines
    #[arg(long)]
    pub manifest: PathBuf,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Harmonic frame: a learn output directory (its common.txt is used)
    /// or a matrix file
    #[arg(long)]
    pub model: PathBuf,

    /// Node-signal table of `subject, group, v1, ..., vn` lines
    #[arg(long)]
    pub signals: PathBuf,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,

    /// Significance level for every test
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,

    /// Train/holdout replicates of the split-power protocol; 0 skips it
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,

    /// Fraction of each group used for training in the protocol
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,

    /// Seed for the protocol's random splits
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct ReplicabilityArgs {
    /// Cohort manifest of `subject, path, group` lines
    #[arg(long)]
    pub manifest: PathBuf,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,

    /// Number of resampled cohort pairs
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,

    /// Shared base size of each resampled pair; defaults to a split
    /// proportional to the cohort size
    #[arg(long, requires = "extra")]
    pub base: Option<usize>,

    /// Size of each of the two disjoint additions
    #[arg(long, requires = "base")]
    pub extra: Option<usize>,

    /// Significance level of the paired element tests
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,

    /// Seed for the resampling draws
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct PselectArgs {
    /// Cohort manifest; evaluates every member
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    pub manifest: Option<PathBuf>,

    /// Single adjacency matrix file
    #[arg(long)]
    pub matrix: Option<PathBuf>,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,

    /// Largest truncation order to evaluate; defaults to n
    #[arg(long)]
    pub p_max: Option<usize>,

    /// Flatness threshold: suggest the first p whose marginal error
    /// decrease falls below this fraction of error(1)
    #[arg(long, default_value_t = 0.01)]
    pub fraction: f64,
}

#[derive(Args)]
pub struct SyntheticArgs {
    /// Rotations per trial
    #[arg(long, default_value_t = 20)]
    pub count: usize,

    /// Angular noise level in radians
    #[arg(long, default_value_t = std::f64::consts::PI / 15.0)]
    pub sigma: f64,

    /// Number of seeded trials; trial k uses seed + k
    #[arg(long, default_value_t = 20)]
    pub trials: usize,

    /// Seed of the first trial
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Rotation axis distribution
    #[arg(long, value_enum, default_value_t = AxisArg::Random)]
    pub axis: AxisArg,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AxisArg {
    /// Independent uniformly random axes
    Random,
    /// Every rotation about the x axis
    X,
    /// Every rotation about the y axis
    Y,
    /// Every rotation about the z axis
    Z,
}

impl AxisArg {
    fn mode(self) -> AxisMode {
        match self {
            AxisArg::Random => AxisMode::Random,
            AxisArg::X => AxisMode::Fixed(Vector3::x()),
            AxisArg::Y => AxisMode::Fixed(Vector3::y()),
            AxisArg::Z => AxisMode::Fixed(Vector3::z()),
        }
    }
}

fn install_threads(threads: usize) -> Result<(), Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if threads > 0 {
        builder = builder.num_threads(threads);
    }
    builder
        .build_global()
        .map_err(|e| Failure::new(EXIT_USAGE, format!("thread pool setup failed: {e}")))
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    install_threads(cli.threads)?;
    match &cli.command {
        Command::Learn(args) => commands::learn(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Replicability(args) => commands::replicability(args),
        Command::Pselect(args) => commands::pselect(args),
        Command::Synthetic(args) => commands::synthetic(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
