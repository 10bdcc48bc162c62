use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Check(String),
    Usage(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Check(names) => write!(f, "failed checks: {names}"),
            CliError::Usage(m) | CliError::Io(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<sixpack_core::Error> for CliError {
    fn from(e: sixpack_core::Error) -> Self {
        use sixpack_core::Error as E;
        match e {
            E::Io(_) => CliError::Io(e.to_string()),
            E::NonFiniteLoss(_) | E::NonFiniteGradient(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "sixpack", version, about = "Category-level 6D pose tracking with anchor-based keypoints")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.steps=500`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train and test sequences for every configured category.
    GenData,
    /// Train one keypoint model per category.
    Train {
        #[arg(long = "category")]
        categories: Vec<String>,
        /// Continue from the latest checkpoint in the run directory.
        #[arg(long)]
        resume: bool,
        /// Stop after this step instead of `train.steps`; the learning-rate
        /// schedule still spans `train.steps`.
        #[arg(long)]
        until: Option<u64>,
    },
    /// Track the test sequences and write a trajectory file.
    Track {
        #[arg(long, default_value = "6pack", value_parser = ["6pack", "icp", "oracle"])]
        method: String,
        #[arg(long = "category")]
        categories: Vec<String>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Sequence file; defaults to the category's test split.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score trajectories and write a metric report and stability curves.
    Eval {
        /// Trajectory files; defaults to every trajectory in the run directory.
        #[arg(long = "traj")]
        trajectories: Vec<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Report path without extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-check suite.
    Check,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Check = cli.command {
        return commands::check();
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match &cli.command {
        Command::GenData => commands::gen_data(&cfg),
        Command::Train { categories, resume, until } => commands::train(&cfg, categories, *resume, *until),
        Command::Track { method, categories, checkpoint, data, out } => commands::track(
            &cfg,
            &commands::TrackArgs {
                method,
                categories,
                checkpoint: checkpoint.as_deref(),
                data: data.as_deref(),
                out: out.as_deref(),
            },
        ),
        Command::Eval { trajectories, data, out } => commands::eval(&cfg, trajectories, data.as_deref(), out.as_deref()),
        Command::Check => unreachable!(),
    }
}

fn main() -> ExitCode {
    let command = Cli::command().after_long_help(config::help_text()).after_help(config::help_text());
    let cli = match command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
