//! `inspire`: data generation, labeling, training, evaluation and ablations.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "inspire", version, about = "Spatial-reasoning question prompts for a tabletop policy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// TOML run configuration; all defaults when omitted (a seed is still required)
    #[arg(long, short)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate expert demonstrations as JSON Lines
    GenData {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, short)]
        n: usize,
    },
    /// Attach rule-based spatial QA to every demonstration step
    Annotate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// none, direction1d, direction3d, distance, location3d or proximity
        #[arg(long)]
        formulation: inspire_core::labeler::VqaFormulation,
        /// Use gripper-event proxy positions instead of object poses
        #[arg(long)]
        proxy: bool,
    },
    /// Train a policy checkpoint
    Train {
        #[command(flatten)]
        config: ConfigArg,
        /// Demonstrations file; generated from the config when omitted
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Loss curve CSV; defaults to the checkpoint path with a `.loss.csv` suffix
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Closed-loop evaluation on the configured splits
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Report JSON; a CSV and a timing file are written next to it
        #[arg(long)]
        out: PathBuf,
        /// Exit with status 3 when a split's success rate is below this
        #[arg(long)]
        min_success: Option<f64>,
        /// Split the threshold applies to; every split when omitted
        #[arg(long, requires = "min_success")]
        split: Option<String>,
    },
    /// Train and evaluate every formulation, layout and seed
    Ablate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out_dir: PathBuf,
        /// Number of seeds, counted up from the master seed; overrides the config grid
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compare analytic and finite-difference gradients of the policy
    Gradcheck {
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed_env = std::env::var(config::SEED_ENV).ok();
    let load = |c: &ConfigArg| config::RunConfig::load(c.config.as_deref(), seed_env.clone()).map_err(CliError::from);
    match cli.command {
        Command::GenData { config, out, n } => commands::gen_data(&load(&config)?, &out, n),
        Command::Annotate { config, input, out, formulation, proxy } => {
            commands::annotate(&load(&config)?, &input, &out, formulation, proxy)
        }
        Command::Train { config, data, out, loss_csv } => {
            commands::train(&load(&config)?, data.as_deref(), &out, loss_csv.as_deref())
        }
        Command::Eval { config, checkpoint, out, min_success, split } => {
            commands::eval(&load(&config)?, &checkpoint, &out, min_success, split.as_deref())
        }
        Command::Ablate { config, out_dir, seeds, jobs } => commands::ablate(&load(&config)?, &out_dir, seeds, jobs),
        Command::Gradcheck { config } => commands::gradcheck(&load(&config)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
