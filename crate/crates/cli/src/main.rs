mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sagnac_core::validation::Level;

/// Phase sensitivity of a squeezing-enhanced Sagnac interferometer.
#[derive(Debug, Parser)]
#[command(name = "sagnac", version, about)]
struct Cli {
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep the working point of one scenario and write a CSV.
    Simulate {
        /// Scenario config, JSON or TOML.
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output CSV; metadata goes to `<PATH>.meta.json`.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Write the CSVs behind one of the published figures.
    Figure {
        /// Preset name (fig4a, fig4b, fig5a, fig5b, fig6a, fig6b, s1, s2a, s2b).
        preset: String,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run the built-in cross-checks and print a pass/fail table.
    Validate {
        #[arg(value_enum, default_value = "all")]
        level: LevelArg,
        /// Print the table as JSON.
        #[arg(long)]
        json: bool,
        /// Deliberately break part of the engine (negative control).
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Find the working point of minimal phase variance inside the config's
    /// phase_grid interval.
    Optimize {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Channels,
    Pipelines,
    Analytic,
    All,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Channels => Level::Channels,
            LevelArg::Pipelines => Level::Pipelines,
            LevelArg::Analytic => Level::Analytic,
            LevelArg::All => Level::All,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FaultArg {
    BrokenLossMap,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return commands::Failure::Usage.into();
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }

    let result = match cli.command {
        Command::Simulate { config, out } => commands::simulate(&config, &out),
        Command::Figure { preset, out } => commands::figure(&preset, &out),
        Command::Validate {
            level,
            json,
            inject_fault,
        } => commands::validate(level.into(), json, inject_fault.is_some()),
        Command::Optimize { config, json } => commands::optimize(&config, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => failure.into(),
    }
}
