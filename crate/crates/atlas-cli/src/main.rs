//! The `atlas` binary: argument parsing and exit-code mapping around the
//! command functions in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use atlas_cli::{cmd_bench, cmd_run, cmd_setup, cmd_trace, cmd_weights};

#[derive(Parser)]
#[command(
    name = "atlas",
    version,
    about = "Indoor localization: survey floor plans, replay scenarios, query sealed stores"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survey the floor plan on an even grid and write the fingerprint map.
    Setup {
        /// Scenario file describing the environment and radio model.
        #[arg(long)]
        scenario: PathBuf,
        /// Where to write the fingerprint map.
        #[arg(long)]
        out: PathBuf,
        /// Grid spacing between survey points, meters.
        #[arg(long, default_value_t = 2.0)]
        grid_spacing: f64,
        /// Dwell time per survey point, seconds.
        #[arg(long, default_value_t = 3)]
        dwell: u32,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replay a scenario against a surveyed map and write location records.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Fingerprint map produced by setup.
        #[arg(long)]
        map: PathBuf,
        /// Where to write the location record log.
        #[arg(long)]
        out: PathBuf,
        /// Optionally save the sealed location store here.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Override the scenario's duration, milliseconds.
        #[arg(long, value_name = "MS")]
        duration: Option<u64>,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List one user's contacts from a sealed location store.
    Trace {
        /// Scenario file; its salt unlocks the store and hashes the user id.
        #[arg(long)]
        scenario: PathBuf,
        /// Sealed store file written by run.
        #[arg(long)]
        store: PathBuf,
        /// Raw user id to trace.
        user: String,
    },
    /// Show per-area match weights for chosen standing positions.
    Weights {
        #[arg(long)]
        scenario: PathBuf,
        /// Fingerprint map produced by setup.
        #[arg(long)]
        map: PathBuf,
        /// Positions to probe, each as x,y,floor.
        #[arg(required = false)]
        positions: Vec<String>,
    },
    /// Time the communication layers with and without sealing.
    Bench {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Allow the unprotected comparison mode to run.
        #[arg(long)]
        plaintext: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Setup {
            scenario,
            out,
            grid_spacing,
            dwell,
            seed,
        } => cmd_setup(&scenario, &out, grid_spacing, dwell, seed),
        Command::Run {
            scenario,
            map,
            out,
            store,
            duration,
            seed,
        } => cmd_run(&scenario, &map, &out, store.as_deref(), duration, seed),
        Command::Trace {
            scenario,
            store,
            user,
        } => cmd_trace(&scenario, &store, &user),
        Command::Weights {
            scenario,
            map,
            positions,
        } => cmd_weights(&scenario, &map, &positions),
        Command::Bench {
            scenario,
            seed,
            plaintext,
        } => cmd_bench(&scenario, seed, plaintext).map(|report| report.to_string()),
    };

    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
