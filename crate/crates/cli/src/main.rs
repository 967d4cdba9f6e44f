use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{ExperimentConfig, Preset, SolverKind};
use output::{OutputDir, Provenance};

/// Transmit beamforming design and evaluation for dual-function
/// radar-communication arrays.
#[derive(Parser)]
#[command(name = "dfrc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment configuration (unset keys take reference values).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in experiment instead of a config file.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Run only this solver (disables side-by-side comparison).
    #[arg(long, global = true, value_enum)]
    solver: Option<SolverKind>,

    #[arg(long, global = true)]
    constant_modulus: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Design W; writes design.csv, report.csv, sinr.csv, trace.csv.
    Design,
    /// Transmit beampattern of the design; writes beampattern.csv.
    Beampattern,
    /// Exact, asymptotic and upper-bound CRB; writes crb.csv.
    Crb,
    /// MLE RMSE against the CRB over radar noise; writes rmse_curve.csv.
    Rmse,
    /// Symbol error rate over SNR; writes ser_curve.csv.
    Ser,
    /// Root-CRB over SINR floors and user counts; writes tradeoff.csv.
    Tradeoff,
    /// Feasible point only; writes feasibility.csv.
    Feasibility,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(dfrc_core::Error),
    #[error("{0}")]
    Io(String),
}

impl From<dfrc_core::Error> for CliError {
    fn from(e: dfrc_core::Error) -> Self {
        if e.is_invalid_input() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numeric(e)
        }
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut config = match (&cli.config, cli.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, Some(p)) => p.config(),
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(kind) = cli.solver {
        config.solver.kind = kind;
        config.solver.compare = false;
    }
    if cli.constant_modulus {
        config.solver.constant_modulus = true;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = resolve(cli)?;
    if matches!(cli.command, Command::Tradeoff) {
        config.validate_tradeoff()?;
    }
    let out = OutputDir::create(&cli.out, Provenance { config_hash: config.hash(), seed: config.seed })?;
    match cli.command {
        Command::Design => commands::design(&config, &out),
        Command::Beampattern => commands::beampattern_cmd(&config, &out),
        Command::Crb => commands::crb(&config, &out),
        Command::Rmse => commands::rmse(&config, &out),
        Command::Ser => commands::ser(&config, &out),
        Command::Tradeoff => commands::tradeoff(&config, &out),
        Command::Feasibility => commands::feasibility(&config, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={}: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
