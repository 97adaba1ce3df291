//! `dirfdr` command line: run directional multiple-testing procedures on a
//! file of z-values, drive Monte-Carlo studies, select the adaptive split
//! point, and render study reports.
//!
//! Exit codes: 0 on success, 1 on input errors (bad flags, malformed files,
//! invalid values), 2 on internal errors.

mod analyze;
mod input;
mod report;
mod simulate;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dirfdr",
    version,
    about = "Directional false discovery rate procedures with sign declarations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one procedure on a CSV of z-values and write the decisions
    Analyze(analyze::AnalyzeArgs),
    /// Run the Monte-Carlo study and write replication and aggregate tables
    Simulate(simulate::SimulateArgs),
    /// Bootstrap selection of the adaptive procedure's split point
    SelectLambda(analyze::SelectLambdaArgs),
    /// Render an aggregate study table as SVG panel grids
    Report(report::ReportArgs),
}

/// Input errors exit with 1, everything unexpected with 2.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl From<dirfdr::Error> for CliError {
    fn from(e: dirfdr::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

/// Write to stdout, treating a closed pipe (e.g. piping into `head`) as
/// success rather than an error.
pub fn print_stdout(body: &str) -> Result<(), CliError> {
    use std::io::Write;
    match std::io::stdout().write_all(body.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(e.into()),
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("DIRFDR_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| CliError::input(format!("DIRFDR_THREADS must be a positive integer, got {raw}")))?;
        if n == 0 {
            return Err(CliError::input("DIRFDR_THREADS must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Analyze(args) => analyze::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::SelectLambda(args) => analyze::run_select_lambda(args),
        Command::Report(args) => report::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
