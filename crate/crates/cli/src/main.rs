//! `oqw`: command-line front end for the open quantum walk simulator.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oqw_core::OqwError;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "oqw",
    version,
    about = "Simulate discrete-time open quantum walks"
)]
pub struct Cli {
    /// Seed for all randomness; a fixed default is used when omitted.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Numerical tolerance (validation tolerance, or the steady-state
    /// threshold for `dqc`).
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Write the result here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the completeness condition at every node of a walk file.
    Validate {
        #[arg(long)]
        walk: PathBuf,
    },
    /// Evolve a state under a finite walk and print the node distribution.
    Evolve {
        #[arg(long)]
        walk: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        steps: usize,
        /// Print the distribution after every step, not just the last.
        #[arg(long)]
        every: bool,
    },
    /// Evolve a state under a homogeneous walk on the integers.
    EvolveZ {
        #[arg(long)]
        lattice: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        steps: usize,
    },
    /// Split a commuting line walk into soliton and gaussian components.
    AnalyzeZ {
        #[arg(long)]
        lattice: PathBuf,
        /// State localized on a single site.
        #[arg(long)]
        state: PathBuf,
        /// Compare the exact distribution after this many steps with the
        /// component prediction instead of listing components.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Sample quantum trajectories and histogram their final positions.
    Trajectories {
        #[command(flatten)]
        source: WalkSource,
        /// Initial coin vector as a JSON list of entries; normalized on input.
        #[arg(long)]
        coin: String,
        #[arg(long, default_value_t = 0)]
        node: i64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 10_000)]
        count: u64,
        /// Add the exact distribution and the total variation distance.
        #[arg(long)]
        compare_exact: bool,
        /// Also write the position sequences of the first `k` trajectories.
        #[arg(long, value_name = "K")]
        dump_paths: Option<usize>,
        /// Destination for `--dump-paths` (appended to the main output when omitted).
        #[arg(long)]
        paths_output: Option<PathBuf>,
    },
    /// Run walk steps through the unitary dilation and compare with the map.
    Dilate {
        #[arg(long)]
        walk: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = CompletionArg::Canonical)]
        completion: CompletionArg,
        /// Append the entries of every completed local unitary.
        #[arg(long)]
        show_unitaries: bool,
    },
    /// Coherent (unitary) walk on the line for a pair with `C† B = 0`.
    Uqw {
        /// Line walk file; the Hadamard-type pair is used when omitted.
        #[arg(long)]
        lattice: Option<PathBuf>,
        #[arg(long, default_value = "sqrt(1/2)", allow_hyphen_values = true)]
        alpha: String,
        #[arg(long, default_value = "sqrt(1/2)", allow_hyphen_values = true)]
        beta: String,
        /// Sign of the left-jump operator of the Hadamard-type pair.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        sign: f64,
        #[arg(long)]
        coin: String,
        #[arg(long, default_value_t = 0)]
        node: i64,
        #[arg(long)]
        steps: usize,
    },
    /// Embed a row-stochastic matrix as an open quantum walk (JSON walk file).
    EmbedCrw {
        /// File with `rows[from][to]`.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_enum, default_value_t = CoinArg::Scalar)]
        coins: CoinArg,
        /// Coin dimension for `identity` and `random` coins.
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    /// Dissipative quantum computing chain for a gate circuit.
    Dqc(DqcArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct WalkSource {
    /// Finite walk file.
    #[arg(long)]
    pub walk: Option<PathBuf>,
    /// Line walk file.
    #[arg(long)]
    pub lattice: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CompletionArg {
    Canonical,
    Reversed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CoinArg {
    Scalar,
    Identity,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Consistent,
    Literal,
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
pub struct DqcArgs {
    /// Circuit file.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// Forward hopping weight.
    #[arg(long, global = true, default_value_t = 0.8)]
    pub omega: f64,
    #[arg(long, global = true, default_value_t = 100_000)]
    pub max_steps: usize,
    /// Comma-separated omegas; prints the sweep table instead of the series.
    #[arg(long, global = true, value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
    #[arg(long, global = true, value_enum, default_value_t = BoundaryArg::Consistent)]
    pub boundary: BoundaryArg,
    #[command(subcommand)]
    pub bench: Option<DqcBench>,
}

#[derive(Subcommand, Debug)]
pub enum DqcBench {
    /// Phase estimation with a diagonal single-qubit target unitary.
    PhaseEstimation {
        #[arg(long, default_value_t = 4)]
        ancillas: usize,
        /// Phase in turns, e.g. `5/16`.
        #[arg(long, default_value = "5/16")]
        phase: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] OqwError),
    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                OqwError::Parse(_) => 3,
                OqwError::NonFinite(_) => 4,
                OqwError::DimensionMismatch { .. } | OqwError::NotSquare { .. } => 5,
                OqwError::NotConverged { .. } => 7,
                _ => 6,
            },
            CliError::Read { .. } | CliError::Write { .. } => 8,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
