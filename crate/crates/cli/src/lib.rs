//! Command-line front end for `orbitflow`: problem generation, gradient-flow
//! runs, landscape enumeration, gradient checks and Gramian probes, each
//! writing plain CSV and JSON artifacts.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod problem_file;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "ORBITFLOW_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_SADDLE: i32 = 2;
pub const EXIT_NON_KINEMATIC: i32 = 3;
pub const EXIT_MAX_ITERS: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "orbitflow", version, about = "Gradient flows for quantum observable maximization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the gradient flow and classify its limit.
    Solve(CommonArgs),
    /// Enumerate the critical points of the orbit cost.
    Landscape(CommonArgs),
    /// Compare analytic and finite-difference directional derivatives.
    Checkgrad(CommonArgs),
    /// Controllability Gramian, rank classification and singularity witness.
    Gramian(CommonArgs),
    /// Draw a random controllable problem and write it as JSON.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for the initial control (and for `--runs`, the first of a range).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of independent runs, executed concurrently.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Number of control subintervals.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Final time, overriding the problem's.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Suppress the summary on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Hilbert space dimension.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Failure of a command, reported as a JSON record and exit code 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: "config",
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: "validation",
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn numeric(e: orbitflow::Error) -> Self {
        Self {
            kind: "numeric",
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} error: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

/// Resolves the output directory: `--out`, then the config, then
/// `$ORBITFLOW_OUT/<command>`, then `orbitflow-out/<command>`.
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>, command: &str) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = config {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("orbitflow-out"));
    root.join(command)
}

/// Runs a parsed command line and returns the process exit code. Errors are
/// printed to stderr as JSON and, when possible, written to `error.json`.
pub fn run(cli: Cli) -> i32 {
    let (name, common) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Landscape(a) => ("landscape", a),
        Command::Checkgrad(a) => ("checkgrad", a),
        Command::Gramian(a) => ("gramian", a),
        Command::Generate(a) => ("generate", &a.common),
    };
    let result = match &cli.command {
        Command::Solve(a) => commands::cmd_solve(a),
        Command::Landscape(a) => commands::cmd_landscape(a),
        Command::Checkgrad(a) => commands::cmd_checkgrad(a),
        Command::Gramian(a) => commands::cmd_gramian(a),
        Command::Generate(a) => commands::cmd_generate(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            let record = artifacts::to_json(&serde_json::json!({ "command": name, "error": err }));
            eprint!("{record}");
            if let Some(dir) = &common.out {
                if std::fs::create_dir_all(dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), &record);
                }
            }
            EXIT_ERROR
        }
    }
}
