//! `qfeedback` command-line front end.

mod commands;
mod config;
mod output;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{RunConfig, SchemeKind};

/// Environment variable holding the default worker-thread count.
const THREADS_ENV: &str = "QFEEDBACK_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numeric(#[from] qfeedback::Error),
    #[error("cannot write {0}: {1}")]
    Io(PathBuf, std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(..) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qfeedback", version, about = "Activity, speed-limit and uncertainty-relation runs for feedback-controlled open quantum systems")]
struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides trajectory.seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output prefix; files are written as <PREFIX>_<command>.csv/.json.
    #[arg(long, global = true, value_name = "PREFIX", default_value = "qfeedback")]
    out: PathBuf,
    /// Worker threads (default: $QFEEDBACK_THREADS, else all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Overrides scheme.kind: none, jump, homodyne or gaussian.
    #[arg(long, global = true, value_name = "S")]
    scheme: Option<SchemeKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Activity and its breakdown over final times and feedback strengths.
    Activity,
    /// Bures angle against the speed-limit integral, with and without feedback.
    Qsl,
    /// Steady-state uncertainty relation over random two-level atoms.
    Tur,
    /// Transient uncertainty relation over random two-qubit codes.
    Qec,
    /// Single trajectory ensemble compared with the master equation.
    Traj,
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.trajectory.seed = s;
    }
    if let Some(k) = cli.scheme {
        cfg.scheme.kind = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_count(cli: &Cli) -> Result<Option<usize>, CliError> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = effective_config(cli)?;
    if let Some(n) = thread_count(cli)? {
        if n == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Activity => commands::activity(&cfg, &cli.out),
        Command::Qsl => commands::qsl(&cfg, &cli.out),
        Command::Tur => commands::tur(&cfg, &cli.out),
        Command::Qec => commands::qec(&cfg, &cli.out),
        Command::Traj => commands::traj(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qfeedback: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
