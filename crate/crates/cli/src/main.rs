//! `surveydp`: audit the privacy of survey sampling designs composed with the
//! Laplace mechanism.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use surveydp_core::DEFAULT_BUDGET;

use crate::report::Format;

#[derive(Debug, Parser)]
#[command(name = "surveydp", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Write the machine report here.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every random choice; overrides a config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on enumerated outcomes and scanned cells.
    #[arg(long, global = true, env = "SURVEYDP_BUDGET", default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Audit one scenario file.
    Audit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate closed-form epsilon bounds; comma-separated lists form a grid.
    Bounds(BoundsArgs),
    /// Scan an allocation rule's global sensitivity.
    AllocScan(AllocScanArgs),
    /// Exact epsilon of randomized-rounding SWoR on one stratum, over a grid.
    Conjecture(ConjectureArgs),
    /// Exact epsilon of one-of-two cluster sampling on random binary data.
    RandomDp(RandomDpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundKind {
    /// ln(1 + r(e^eps - 1))
    Poisson,
    /// r * eps
    SmallEps,
    /// gs * eps
    Degradation,
    /// One of two clusters, sizes 0 and b, one record added to the first.
    Cluster,
    /// One of two identically distributed clusters.
    Homogeneous,
    /// One of two clusters of n uniform binary values.
    RandomDp,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    pub kind: BoundKind,
    #[arg(long, value_delimiter = ',', required = true)]
    pub eps: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub rate: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub b: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    pub gs: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum RuleName {
    Fixed,
    ParityDemo,
    ProportionalFloor,
    ProportionalHamilton,
    HuntingtonHill,
    RandomizedRounding,
}

#[derive(Debug, Clone, Args)]
pub struct AllocScanArgs {
    #[arg(long, value_enum)]
    pub rule: RuleName,
    /// Number of strata.
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub max_size: u64,
    /// Totals for proportional rules; a list scans each.
    #[arg(long, value_delimiter = ',')]
    pub total: Vec<u64>,
    /// Per-stratum rates for randomized rounding.
    #[arg(long, value_delimiter = ',')]
    pub rates: Vec<f64>,
    /// Per-stratum counts for the fixed rule.
    #[arg(long, value_delimiter = ',')]
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ConjectureArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0])]
    pub eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75])]
    pub rates: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4, 5, 6])]
    pub sizes: Vec<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RandomDpArgs {
    /// Records per cluster.
    #[arg(long, default_value_t = 64)]
    pub n: u64,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Audit { config } => commands::audit(config, &cli.global),
        Command::Bounds(args) => commands::bounds(args, &cli.global),
        Command::AllocScan(args) => commands::alloc_scan(args, &cli.global),
        Command::Conjecture(args) => commands::conjecture(args, &cli.global),
        Command::RandomDp(args) => commands::random_dp(args, &cli.global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
