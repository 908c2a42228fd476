//! `pqv`: generate labelled grid snapshots, train the PQV-image classifier, evaluate it
//! and assess single operating points.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "pqv",
    version,
    about = "Power-grid security screening with PQV images"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, replacing `paths.out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample, solve and label operating points into a dataset file.
    Generate,
    /// Train the classifier and write the best checkpoint plus history.csv.
    Train,
    /// Score the checkpoint on the test split and write the report files.
    Eval,
    /// Compare network and oracle on one dataset sample.
    Assess {
        /// Dataset index of the operating point.
        #[arg(long, default_value_t = 0)]
        sample: usize,
        /// Time both paths over this many repetitions.
        #[arg(long)]
        bench: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if let Some(t) = cli.common.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    let (cfg, base) = config::load(cli.common.config.as_deref())?;
    let r = config::resolve(cfg, &base, cli.common.seed, cli.common.out)?;
    match cli.command {
        Command::Generate => commands::generate(&r),
        Command::Train => commands::train(&r),
        Command::Eval => commands::eval(&r),
        Command::Assess { sample, bench } => commands::assess(&r, sample, bench),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
