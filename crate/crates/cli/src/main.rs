use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use chaos_probe::experiments::run_with_workers;
use chaos_probe::output::{write_run, Manifest};
use chaos_probe::{Result, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "chaos-probe",
    version,
    about = "Sense environment chaos with a dephasing qubit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config or manifest file.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { config } => {
            RunConfig::load(&config)?.validate()?;
            println!("{}: ok", config.display());
        }
        Command::Run {
            config,
            out,
            workers,
            seed,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let start = Instant::now();
            let tables = run_with_workers(&cfg, workers)?;
            let manifest = Manifest {
                config: &cfg,
                seed: cfg.seed,
                version: env!("CARGO_PKG_VERSION"),
                workers,
                wall_time_seconds: start.elapsed().as_secs_f64(),
                outputs: tables.iter().map(|t| t.file_name()).collect(),
            };
            for path in write_run(&out, &tables, &manifest)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
