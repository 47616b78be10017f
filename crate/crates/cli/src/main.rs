//! `gtlab` command-line front-end.

mod commands;

use clap::{Parser, ValueEnum};
use gtlab::{ErrorKind, GtError};
use std::path::PathBuf;
use std::process::ExitCode;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "gtlab", version, about = "Gelfand-Tsetlin, bead model and free compression numerics")]
pub struct Cli {
    /// RNG seed; falls back to GTLAB_SEED, then 0.
    #[arg(long, global = true, env = "GTLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output file (written atomically); standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads for parallel commands. Each draw or replicate owns its
    /// own RNG stream, so seeded results do not depend on this value.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: commands::Command,
}

/// Exit status per error class; 2 is left to argument errors.
fn exit_code(e: &GtError) -> u8 {
    match e.kind() {
        ErrorKind::Domain => 3,
        ErrorKind::Capacity => 4,
        ErrorKind::Precision => 5,
        ErrorKind::Convergence => 6,
        ErrorKind::Inconclusive => 7,
        ErrorKind::Io => 8,
    }
}

/// Exit status when `verify` ran but some criterion failed.
pub const EXIT_VERIFY_FAILED: u8 = 9;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global() {
        eprintln!("gtlab: cannot configure threads: {e}");
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("gtlab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
