//! `hicontrast` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 rank violation,
//! 3 a solver did not converge (rows are still written).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hicontrast::ZeroModePolicy;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(hicontrast::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => f.write_str(m),
            Self::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<hicontrast::Error> for CliError {
    fn from(e: hicontrast::Error) -> Self {
        Self::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Lib(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Lib(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    RankViolation,
    NotConverged,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Self::Ok => 0,
            Self::RankViolation => 2,
            Self::NotConverged => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "hicontrast", version, about = "A-free projections, cell problems and high-contrast sweeps")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for outputs and manifests (also settable via
    /// HICONTRAST_OUTPUT_DIR).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum Mode {
    ZeroMean,
    KeepMean,
}

impl From<Mode> for ZeroModePolicy {
    fn from(m: Mode) -> Self {
        match m {
            Mode::ZeroMean => ZeroModePolicy::ZeroMean,
            Mode::KeepMean => ZeroModePolicy::KeepMean,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sampled constant-rank certificate for a catalog name or operator file.
    Rank {
        operator: String,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Projects a field file onto A-free fields.
    Project {
        #[arg(long)]
        op: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: String,
        #[arg(long, value_enum, default_value = "zero-mean")]
        mode: Mode,
    },
    /// Recovers a potential w with B w = u for an A-free field u.
    Potential {
        #[arg(long)]
        op_a: String,
        #[arg(long)]
        op_b: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// A-quasiconvex envelope from a config file.
    Envelope { config: PathBuf },
    /// Homogenized density table from a config file.
    Fhom { config: PathBuf },
    /// Soft-inclusion constant from a config file.
    Alpha0 { config: PathBuf },
    /// Sweep of min F_eps against the predicted limit.
    Sweep { config: PathBuf },
    /// The -det counterexample table.
    Counterexample {
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125")]
        eps_list: Vec<f64>,
        /// Grid for the reference envelope value.
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long)]
        output_csv: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let out = output::OutputDir::from_flag(cli.output_dir.clone());
    match commands::run(cli.command, &out) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
