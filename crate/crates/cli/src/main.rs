//! `mdllab`: runs declarative experiment configs and emits plot data.
//!
//! Exit codes: 0 success, 1 I/O or output-directory problem, 2 configuration
//! error, 3 numerical failure. Failures print one JSON object on stderr.

mod config;
mod error;
mod plotdata;
mod run;

use clap::{Parser, Subcommand};
use config::RunConfig;
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mdllab", about = "Quantum, classical and hybrid wavefunction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run directory; overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config and print its normalized form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write gnuplot-ready files for a finished run.
    Plotdata { run_dir: PathBuf },
    /// Print the version.
    Version,
}

/// Caps the rayon pool at `MDLLAB_THREADS` when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("MDLLAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config::ConfigError::Invalid(format!("MDLLAB_THREADS must be a positive integer, got {v:?}")))?;
    // a second initialisation only happens in tests and is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out, seed } => {
            configure_threads()?;
            let mut raw = RunConfig::load(&config)?;
            if seed.is_some() {
                raw.seed = seed;
            }
            let normalized = raw.normalize()?;
            let dir = run::execute(&normalized, out.as_deref())?;
            println!("{}", dir.display());
        }
        Command::Validate { config } => {
            print!("{}", RunConfig::load(&config)?.normalize()?.to_toml());
        }
        Command::Plotdata { run_dir } => {
            let out = plotdata::emit_plotdata(&run_dir)?;
            println!("{}", out.display());
        }
        Command::Version => println!("mdllab {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
