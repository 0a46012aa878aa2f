//! `peerpressure`: generate graphs and profiles, simulate opinion dynamics,
//! diagnose trajectories and fit pressure schedules.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "peerpressure", version, about = "Opinion dynamics under time-varying peer pressure")]
pub struct Cli {
    /// RNG seed (used by `generate` and by `simulate --repeat`)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path; stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated graph (edge list) or agent profile
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Run the dynamics and write the trajectory
    Simulate(SimulateArgs),
    /// Check a trajectory and report utilities, residuals, rates and PoA
    Diagnose(DiagnoseArgs),
    /// Fit a piecewise-constant pressure schedule to an observation panel
    Fit(FitArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenerateKind {
    /// Preferential-attachment graph
    Ba {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
    },
    /// Cliques joined by bridge edges
    Cliques {
        /// Clique sizes, e.g. 5,5,5
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Bridge the last agent of each clique to the first agent of the next
        #[arg(long)]
        chain: bool,
        /// Extra bridges as `i-j` pairs, e.g. 0-7,3-12
        #[arg(long, value_delimiter = ',')]
        bridges: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        intra_weight: f64,
        #[arg(long, default_value_t = 1.0)]
        bridge_weight: f64,
    },
    /// Random agent profile: x_plus ~ U[0,1], s ~ U[s_min, s_max]
    Profile {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        s_min: f64,
        #[arg(long, default_value_t = 1.0)]
        s_max: f64,
        /// Probability that an agent gets s = 0
        #[arg(long, default_value_t = 0.0)]
        zero_fraction: f64,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    /// constant:<rho> | linear:<a>,<b> | saturating:<rho0>,<rho_star>,<rate> | table:<v1>,...
    #[arg(long)]
    pub schedule: String,
    #[arg(long, default_value_t = 1000)]
    pub k_max: usize,
    /// Stop once the sup-norm step difference falls below this
    #[arg(long, default_value_t = 0.0)]
    pub stop_tol: f64,
    /// Initial state as a `k,agent_id,opinion` table with one step; defaults to x_plus
    #[arg(long)]
    pub x0: Option<PathBuf>,
    /// Summary JSON path; defaults to `<out>.summary.json`, or stderr when writing to stdout
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Independent runs; run 0 starts from x0, the others from seeded random states
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Trajectory CSV written by `simulate`
    #[arg(long)]
    pub trajectory: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long)]
    pub schedule: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Euclidean,
    Sup,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long)]
    pub panel: PathBuf,
    /// Maximum objective evaluations
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    /// Starting ρ for every interval
    #[arg(long, default_value_t = 1.0)]
    pub init: f64,
    /// Starting ρ per interval; overrides --init
    #[arg(long, value_delimiter = ',')]
    pub init_values: Vec<f64>,
    /// Initial state at k = 0 as a one-step opinion table; defaults to the first snapshot
    #[arg(long)]
    pub x0: Option<PathBuf>,
    /// Distance between simulated and observed snapshots
    #[arg(long, value_enum, default_value_t = NormArg::Euclidean)]
    pub norm: NormArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
