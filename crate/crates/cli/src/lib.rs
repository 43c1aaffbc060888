//! `nlinterf` command-line front end.

/// `println!` that shrugs off a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub mod commands;
pub mod config;
mod report;
mod svg;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Process outcome with a stable exit code: 1 for I/O, config and usage
/// problems, 2 for numerical non-convergence or a failed check.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn io(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    /// Maps a library error onto the exit-code contract.
    pub fn from_core(e: nlinterf::Error) -> Self {
        use nlinterf::Error::*;
        match e {
            Estimation(_) | NotConverged(_) | Singular { .. } | Calibration(_) => Self::numerical(e.to_string()),
            _ => Self::config(e.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

#[derive(Debug, Parser)]
#[command(name = "nlinterf", version, about = "Quantum-like nonlinear interferometry simulator and dispersion estimator")]
pub struct Cli {
    /// Scenario file (TOML, or a trace metadata JSON sidecar).
    #[arg(long, global = true, env = "NLINTERF_CONFIG")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `[noise] seed`.
    #[arg(long, global = true, env = "NLINTERF_SEED")]
    pub seed: Option<u64>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true, env = "NLINTERF_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads for Monte Carlo (default: all cores).
    #[arg(long, global = true, env = "NLINTERF_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the DFG/SFG/SHG acceptance curves and check SHG suppression.
    Acceptance,
    /// Synthesize a noiseless and a noisy trace.
    Synth,
    /// Fit a trace CSV and extract the dispersion.
    Fit {
        /// Trace with time_s,lambda_nm,intensity columns.
        trace: PathBuf,
    },
    /// Monte Carlo over independent noisy scans.
    Mc {
        /// Number of scans; overrides `[mc] n_scans`.
        #[arg(long)]
        n: Option<usize>,
        /// Also render the histogram as SVG.
        #[arg(long)]
        svg: bool,
    },
    /// Run the phase and interference property checks.
    Verify {
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

/// Parses arguments, runs the command, and returns the exit code.
pub fn run<I, S>(args: I, vars: Vec<(String, String)>) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli, vars) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}
