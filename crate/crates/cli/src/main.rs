mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "epa", version, about = "Critical-threshold regions, fuzzing and spectral runs for the 1D Euler-Poisson-alignment system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Coordinates used for per-point output.
    #[arg(long, global = true, value_enum, default_value_t = PlaneArg::Grho)]
    pub plane: PlaneArg,
    /// Use the literal q = 0 floor for the strong-alignment weakly singular region.
    #[arg(long, global = true)]
    pub literal_paper_boundary: bool,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Build regions and export scaffold JSON plus boundary CSVs in both planes.
    Region,
    /// Classify initial data against the configured regions.
    Classify {
        /// CSV with columns x, rho, u (replaces `initial` from the config).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the spectral solver and write diagnostics and events.
    Simulate,
    /// Random band-signal trials against each configured region.
    Fuzz,
    /// Rearrangement bounds for a tabulated kernel.
    Rearrange {
        /// Kernel table (one cell average per row); defaults to the configured kernel.
        #[arg(long)]
        kernel: Option<PathBuf>,
        /// Cross-check the bounds against the exact linear-program oracle.
        #[arg(long)]
        oracle: bool,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneArg {
    Pq,
    Grho,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Admissibility { region: String, margin: f64 },
    Data(String),
    Fuzz(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Admissibility { .. } => 2,
            CliError::Data(_) => 3,
            CliError::Fuzz(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Admissibility { region, margin } => {
                write!(f, "admissibility violated for {region}: margin = {margin:e}")
            }
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Fuzz(m) => write!(f, "fuzz violation: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
