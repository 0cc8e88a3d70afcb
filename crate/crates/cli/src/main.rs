use std::path::PathBuf;
use std::process::ExitCode;

use bdis_cli::config::{parse_config, ConfigError, ExperimentConfig};
use bdis_cli::runner::{self, RunError, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bdis", version, about = "Convergence studies for boundary-damped RQMC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study and write CSV, reference lines and a summary.
    Run {
        config: PathBuf,
        /// Directory for the output files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Smallest sample sizes left out of the rate fit.
        #[arg(long, default_value_t = 0)]
        drop_transient: usize,
    },
    /// Report the t-quality of a Sobol' net with 2^m points in s dimensions.
    CheckNet { m: u32, s: usize },
    /// Print the damping schedule of a config without running it.
    Schedule { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    if let Ok(seed) = std::env::var("BDIS_SEED") {
        cfg.seed = seed.trim().parse().map_err(|_| ConfigError {
            line: None,
            message: format!("BDIS_SEED: expected an unsigned integer, got '{seed}'"),
        })?;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config, out, threads, drop_transient } => {
            if let Some(k) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                    .map_err(|e| ConfigError { line: None, message: format!("--threads: {e}") })?;
            }
            let cfg = load(&config)?;
            let done = runner::run(&cfg, &RunOptions { out_dir: out, drop_transient })?;
            print!("{}", done.summary);
            log::info!("wrote {}", done.csv_path.display());
        }
        Command::CheckNet { m, s } => print!("{}", runner::describe_net(m, s)?),
        Command::Schedule { config } => print!("{}", runner::describe_schedule(&load(&config)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
