use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kinex_cli::config::Settings;
use kinex_cli::error::{CliError, CliResult};
use kinex_cli::run;

#[derive(Debug, Parser)]
#[command(name = "kinex", version, about = "Kinetic wealth-exchange models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Monte Carlo ensemble: merged wealth histogram and pdf.
    Simulate,
    /// Relaxation of a perturbed steady state: distance series and fitted time.
    Evolve,
    /// Fixed-point steady state from the Gamma (or exponential) seed.
    Steady,
    /// Gamma residual curves of the angle model.
    Residual,
    /// Steady state and relaxation for every listed parameter value.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Evolve => "evolve",
            Command::Steady => "steady",
            Command::Residual => "residual",
            Command::Sweep => "sweep",
        }
    }
}

fn execute(command: Command, settings: Settings) -> CliResult<std::path::PathBuf> {
    let settings = settings.resolve()?;
    if let Some(jobs) = settings.jobs {
        if jobs == 0 {
            return Err(CliError::Config("jobs: must be at least 1".into()));
        }
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match command {
        Command::Simulate => run::simulate(&settings),
        Command::Evolve => run::evolve(&settings),
        Command::Steady => run::steady(&settings),
        Command::Residual => run::residual(&settings),
        Command::Sweep => run::sweep(&settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command, cli.settings) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("kinex {}: {err}", cli.command.name());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
