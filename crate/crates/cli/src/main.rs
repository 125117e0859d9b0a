//! `fstefan`: command-line front end for the Fisher-Stefan solver.
//!
//! Exit codes: 0 for a clean run, 1 for bad input or I/O failure, 2 when the
//! solver broke down (Newton failure or instability). `check` exits 1 when
//! any criterion fails.

mod config;
mod outdir;
mod phase;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "fstefan", version, about = "Fisher-Stefan free boundary laboratory")]
struct Cli {
    /// Output root. Overrides the FSTEFAN_OUTPUT_DIR environment variable.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config and write trace, profiles, summary and manifest.
    Simulate { config: PathBuf },
    /// Run a config once per value of its `sweep` parameter.
    Sweep { config: PathBuf },
    /// Tabulate V* and kappa over a grid of negative wave speeds.
    Phaseplane {
        /// Comma-separated wave speeds, all negative.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
        c: Vec<f64>,
        /// Integration step (default shrinks with |c|, at most 1e-4).
        #[arg(long)]
        dz: Option<f64>,
        /// Also write each trajectory as z,U,V.
        #[arg(long)]
        trajectories: bool,
    },
    /// Run the built-in acceptance suite.
    Check {
        /// Write the report as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Comma-separated criterion numbers (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
        /// Scale one stencil coefficient by this factor (fault injection).
        #[arg(long)]
        mutate: Option<f64>,
    },
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    let root = outdir::output_root(cli.out.as_deref());
    match cli.command {
        Command::Simulate { config } => simulate::simulate(&config, &root),
        Command::Sweep { config } => simulate::sweep(&config, &root),
        Command::Phaseplane { c, dz, trajectories } => phase::phaseplane(
            &phase::PhaseArgs {
                c: &c,
                dz,
                trajectories,
            },
            &root,
        ),
        Command::Check { json, only, mutate } => phase::check(&phase::CheckArgs {
            only: &only,
            json: json.as_deref(),
            mutate,
        }),
    }
}

fn main() -> ExitCode {
    // Usage errors exit 1 like any other bad input; 2 is reserved for solver
    // breakdowns.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
