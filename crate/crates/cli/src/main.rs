//! `sumset`: certified witness builders, threshold searches and support
//! system checks.
//!
//! Exit status: 0 success, 1 usage or input error, 2 nothing found within
//! the search space or budget, 3 a certificate or checker reported a
//! violation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "sumset", version, about = "Monochromatic sumset witnesses, searches and checkers")]
struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads. Outputs do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Two-color witness builder.
    Construct2(Construct2Args),
    /// General-r witness builder.
    ConstructR(ConstructRArgs),
    /// Re-verify a certificate from scratch.
    Verify(VerifyArgs),
    /// Threshold scan for monochromatic sumsets on initial segments.
    Search(SearchArgs),
    /// Generate or check support assignments.
    Deltasys(DeltasysArgs),
    /// Direct homogeneous-set search.
    Ramsey(RamseyArgs),
}

#[derive(Debug, Args, Serialize)]
struct Construct2Args {
    /// Oracle descriptor, `kind` or `kind:param,param`.
    #[arg(long)]
    oracle: String,
    /// Coordinates available to the homogeneous-set search.
    #[arg(long)]
    n: usize,
    /// Members below the top.
    #[arg(long)]
    m: usize,
    /// Search node budget; unlimited for small universes by default.
    #[arg(long)]
    budget: Option<u64>,
    /// Certificate path; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ConstructRArgs {
    #[arg(long)]
    oracle: String,
    /// Number of colors.
    #[arg(long)]
    r: usize,
    #[arg(long)]
    n: usize,
    /// Members per family in the final system.
    #[arg(long)]
    m: usize,
    /// Members per family kept by the shrinking stage (default m + 2).
    #[arg(long)]
    shrink_size: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    /// Certificate JSON file.
    certificate: PathBuf,
    /// Oracle descriptor, for certificates that do not name one.
    #[arg(long)]
    oracle: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct SearchArgs {
    /// Size of X.
    #[arg(long)]
    k: usize,
    /// Number of colors.
    #[arg(long)]
    r: usize,
    /// Largest M scanned.
    #[arg(long)]
    m_max: usize,
    /// Node budget per M; budget exhaustion gives UNDECIDED.
    #[arg(long)]
    budget: Option<u64>,
    /// `sums-within` colors 1..M; `elements-within` colors 1..2M.
    #[arg(long, default_value = "sums-within")]
    finitization: sumset_core::search::Finitization,
    /// Random colorings checked against each FORCED verdict.
    #[arg(long, default_value_t = 10_000)]
    spot_checks: usize,
    /// Directory for `table.csv` and one file per bad coloring; the table
    /// goes to stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    out_dir: Option<PathBuf>,
    /// Directory for resumable per-M checkpoints.
    #[arg(long)]
    #[serde(skip)]
    checkpoint_dir: Option<PathBuf>,
    /// Nodes between checkpoint writes.
    #[arg(long, default_value_t = 1_000_000)]
    #[serde(skip)]
    checkpoint_every: u64,
}

#[derive(Debug, Args, Serialize)]
struct DeltasysArgs {
    #[command(subcommand)]
    action: DeltasysAction,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
enum DeltasysAction {
    /// Generate a canonical assignment and check it.
    Generate {
        /// Size of E.
        #[arg(long)]
        n: usize,
        /// Largest domain set size.
        #[arg(long)]
        d: usize,
        /// Extra support points per domain size 0..=d, comma separated.
        #[arg(long, value_delimiter = ',')]
        pad: Option<Vec<usize>>,
        /// Random spare coordinates per gap, at most this many.
        #[arg(long, default_value_t = 0)]
        slack: usize,
        /// Where to write the generated assignment.
        #[arg(long)]
        #[serde(skip)]
        instance: Option<PathBuf>,
        #[arg(long)]
        #[serde(skip)]
        out: Option<PathBuf>,
    },
    /// Check an assignment read from a JSON file.
    Check {
        input: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Serialize)]
struct RamseyArgs {
    /// `derived:LEVEL` (needs --oracle and --r) or `random:ARITY:COLORS`.
    #[arg(long)]
    coloring: String,
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long)]
    r: Option<usize>,
    /// Universe 0..n.
    #[arg(long)]
    n: usize,
    /// Size of the homogeneous set.
    #[arg(long)]
    m: usize,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli.command, cli.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}
