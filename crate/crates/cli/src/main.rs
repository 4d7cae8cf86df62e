use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nlpf_cli::commands::{self, Options};
use nlpf_core::Backend;

#[derive(Parser)]
#[command(
    name = "nlpf",
    version,
    about = "Energy-stable solvers for nonlocal Allen-Cahn and Cahn-Hilliard equations"
)]
struct Cli {
    /// Convolution backend, overriding the config.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    /// Worker threads for the parallel loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory that relative output paths are written under.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Direct,
    Fft,
    Auto,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Direct => Backend::Direct,
            BackendArg::Fft => Backend::Fft,
            BackendArg::Auto => Backend::Auto,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration, writing the energy CSV and snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a refinement study and write the rate table.
    Converge {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate one configuration and audit each energy invariant.
    EnergyTest {
        #[arg(long)]
        config: PathBuf,
    },
    /// Quick property checks on small grids.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let opts = Options {
        backend: cli.backend.map(Backend::from),
        out: cli.out,
    };
    match cli.command {
        Command::Run { config } => {
            commands::cmd_run(&commands::load_run(&config)?, &opts)?;
        }
        Command::Converge { config } => {
            commands::cmd_converge(&commands::load_study(&config)?, &opts)?;
        }
        Command::EnergyTest { config } => {
            commands::cmd_energy_test(&commands::load_run(&config)?, &opts)?;
        }
        Command::Selftest => {
            let checks = commands::cmd_selftest()?;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if checks.iter().any(|c| !c.pass) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
