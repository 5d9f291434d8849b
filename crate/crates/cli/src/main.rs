//! `mfg`: compute stationary mean field equilibria and judge their
//! robustness from the command line.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mfg_essential::MfgError;

#[derive(Parser, Debug)]
#[command(name = "mfg", version, about = "Stationary equilibria of finite mean field games and their robustness")]
struct Cli {
    /// Output on standard output.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,
    /// Write the JSON report to this file as well.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
pub(crate) enum Command {
    /// Check generator constraints and the discount rate on a grid.
    Validate {
        /// Model file or bundled fixture name (e.g. REF-1A).
        model: String,
        #[arg(long, default_value_t = 50)]
        grid: usize,
    },
    /// Find all stationary equilibria.
    Equilibria {
        model: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Classify every equilibrium with the sufficient criteria.
    Essential {
        model: String,
        #[command(flatten)]
        search: SearchArgs,
        /// Ball radius around m for strategy persistence.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Grid for perturbation constants and irreducibility scans.
        #[arg(long)]
        metric_grid: Option<usize>,
        /// Also probe every equilibrium.
        #[arg(long)]
        probe: bool,
        #[command(flatten)]
        probe_args: ProbeArgs,
    },
    /// Perturbation probe of one equilibrium.
    Probe {
        model: String,
        /// 1-based index into the equilibrium list.
        #[arg(long, default_value_t = 1)]
        equilibrium: usize,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        probe_args: ProbeArgs,
    },
    /// Probe random games from an affine family.
    Ensemble {
        /// Family description (JSON); the default family if omitted.
        family: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Displacement threshold at the smallest radius.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Known non-essential games to include as controls.
        #[arg(long = "inject")]
        inject: Vec<String>,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        probe_args: ProbeArgs,
    },
    /// Sup-norm distance between two games on a grid.
    Distance {
        model_a: String,
        model_b: String,
        #[arg(long, default_value_t = 50)]
        grid: usize,
    },
    /// Compare linear-solve values with a Monte Carlo estimate.
    McCheck {
        model: String,
        /// Deterministic strategy as 1-based actions, e.g. 1,2.
        #[arg(long, value_delimiter = ',', required = true)]
        strategy: Vec<usize>,
        /// Population distribution (default uniform).
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<f64>>,
        /// Initial distribution (default uniform).
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List bundled fixtures, or print one as a model document.
    Fixtures { name: Option<String> },
}

#[derive(Args, Debug, Clone)]
pub(crate) struct SearchArgs {
    /// Seeding grid resolution for stationary points.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Newton convergence tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Cap on the number of deterministic strategies.
    #[arg(long, default_value_t = 4096)]
    pub cap: usize,
}

#[derive(Args, Debug, Clone)]
pub(crate) struct ProbeArgs {
    /// Strictly decreasing perturbation radii.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Exit statuses.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub(crate) enum Status {
    Ok = 0,
    NotMet = 1,
    Input = 2,
    Cap = 3,
    Empty = 4,
}

#[derive(Debug)]
pub(crate) struct Failure {
    pub status: Status,
    pub message: String,
}

impl From<MfgError> for Failure {
    fn from(e: MfgError) -> Self {
        let status = match e {
            MfgError::CapExceeded { .. } => Status::Cap,
            MfgError::EmptySet => Status::Empty,
            _ => Status::Input,
        };
        Failure { status, message: e.to_string() }
    }
}

pub(crate) fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        status: Status::Input,
        message: message.into(),
    }
}

/// A finished command: JSON report, table rendering and exit status.
pub(crate) struct Outcome {
    pub json: serde_json::Value,
    pub table: String,
    pub status: Status,
    /// Printed to standard error.
    pub notes: Vec<String>,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("MFG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| input_error(format!("MFG_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| input_error(format!("cannot size the thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    configure_threads()?;
    let outcome = commands::dispatch(&cli.command)?;
    let text = serde_json::to_string_pretty(&outcome.json).expect("reports serialize") + "\n";
    if let Some(path) = &cli.out {
        std::fs::write(path, &text).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
    }
    match cli.format {
        Format::Json => print!("{text}"),
        Format::Table => print!("{}", outcome.table),
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("{note}");
            }
            ExitCode::from(outcome.status as u8)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.status as u8)
        }
    }
}
