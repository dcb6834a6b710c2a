//! `crane`: stacker crane tours, bipartite matchings, transport bounds and
//! dynamic pickup-delivery simulation from the command line.
//!
//! Exit codes: 0 success, 1 parse or input error, 2 instance too large for
//! the requested algorithm, 3 unknown experiment preset.

mod commands;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crane_core::CraneError;

#[derive(Parser, Debug)]
#[command(name = "crane", version, about = "Stacker crane routing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed; trial k uses stream k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (or directory for `simulate`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a random instance from a density pair and write it as JSON.
    Sample {
        #[arg(long, default_value = "uniform-cube")]
        case: String,
        #[arg(long, short)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Build a stacker crane tour for an instance file.
    Solve {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = SolveAlgorithm::Splice)]
        algorithm: SolveAlgorithm,
        #[command(flatten)]
        common: Common,
    },
    /// Match deliveries to pickups for an instance file.
    Match {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MatchAlgorithm::Hungarian)]
        algorithm: MatchAlgorithm,
        /// Density pair the instance was drawn from (randomized only).
        #[arg(long)]
        case: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Bracket the Wasserstein distance between a case's densities.
    Wasserstein {
        #[arg(long, default_value = "case1")]
        case: String,
        /// Cells along the longest side of the environment.
        #[arg(long, short)]
        r: usize,
        /// Plan written to `--out` as CSV.
        #[arg(long, value_enum, default_value_t = PlanChoice::Pessimistic)]
        plan: PlanChoice,
        #[command(flatten)]
        common: Common,
    },
    /// Next-order matching constants κ and κ̃ of a case.
    Kappa {
        #[arg(long, default_value = "case1")]
        case: String,
    },
    /// Run the dynamic pickup-delivery simulator from a JSON config.
    Simulate {
        config: PathBuf,
        /// Transport grid resolution used for the theoretical threshold.
        #[arg(long)]
        resolution: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a preset experiment and write plot-ready CSV.
    Experiment {
        /// fig4, fig5, fig6, fig7, table1 or table2.
        preset: String,
        #[arg(long)]
        case: Option<String>,
        /// Comma-separated sizes (grid resolutions for table1).
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SolveAlgorithm {
    Splice,
    Exact,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum MatchAlgorithm {
    Hungarian,
    Brute,
    Randomized,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum PlanChoice {
    Optimistic,
    Pessimistic,
}

#[derive(Debug)]
pub struct UnknownPreset(pub String);

impl std::error::Error for UnknownPreset {}

impl std::fmt::Display for UnknownPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "unknown preset `{}` (expected fig4, fig5, fig6, fig7, table1 or table2)", self.0)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UnknownPreset>().is_some() {
        return 3;
    }
    match err.downcast_ref::<CraneError>() {
        Some(CraneError::Size(_)) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Sample { case, n, common } => commands::sample(&case, n, &common),
        Command::Solve { input, algorithm, common } => commands::solve(&input, algorithm, &common),
        Command::Match {
            input,
            algorithm,
            case,
            common,
        } => commands::matching(&input, algorithm, case.as_deref(), &common),
        Command::Wasserstein { case, r, plan, common } => commands::wasserstein(&case, r, plan, &common),
        Command::Kappa { case } => commands::kappa(&case),
        Command::Simulate {
            config,
            resolution,
            common,
        } => commands::simulate(&config, resolution, &common),
        Command::Experiment {
            preset,
            case,
            sizes,
            trials,
            common,
        } => experiment::run(&preset, case.as_deref(), sizes, trials, &common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // output closed early, e.g. piped into `head`
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}
