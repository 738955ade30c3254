//! `netrand` command-line front end.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;
use output::Outputs;

/// Device-independent randomness certification for broadcast networks.
#[derive(Debug, Parser)]
#[command(name = "netrand", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Global seed, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory, overriding the config (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Hierarchy level such as `2`, `1+AB` or `local`.
    #[arg(long, global = true, value_name = "SPEC")]
    level: Option<String>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Entropy bounds over a grid of noise parameters.
    Sweep,
    /// Guessing-probability bound for a behavior file.
    Certify,
    /// Broadcast-locality test by linear programming.
    Locality,
    /// Simulated spot-checking protocol transcript.
    Simulate,
    /// Toeplitz extraction from a transcript.
    Extract,
    /// Finite-size rate table.
    Rate,
    /// Writes the relaxation in SDPA sparse format.
    ExportSdpa,
    /// Prints the JSON schema of the run configuration.
    Schema,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Certify => "certify",
            Command::Locality => "locality",
            Command::Simulate => "simulate",
            Command::Extract => "extract",
            Command::Rate => "rate",
            Command::ExportSdpa => "export-sdpa",
            Command::Schema => "schema",
        }
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(level) = &cli.level {
        cfg.level = level
            .parse()
            .map_err(|e: netrand::Error| CliError::Config(e.to_string()))?;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = Some(jobs);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Schema = cli.command {
        print!("{}", config::schema_json());
        return Ok(());
    }
    let cfg = effective_config(cli)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Outputs::create(&dir)?;
    let result = match cli.command {
        Command::Sweep => commands::sweep(&cfg, &mut out),
        Command::Certify => commands::certify(&cfg, &mut out),
        Command::Locality => commands::locality(&cfg, &mut out),
        Command::Simulate => commands::simulate(&cfg, &mut out),
        Command::Extract => commands::extract(&cfg, &mut out),
        Command::Rate => commands::rate(&cfg, &mut out),
        Command::ExportSdpa => commands::export_sdpa(&cfg, &mut out),
        Command::Schema => unreachable!(),
    };
    let value = serde_json::to_value(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    out.finish(cli.command.name(), cfg.seed, &value)?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
