//! `fibertwist`: simulate reflection traces, reconstruct twist profiles and
//! run the numerical checks.
//!
//! Exit status: 0 on success, 1 for usage or configuration errors, 2 when a
//! computation fails numerically (non-convergence, blow-up, failed check).

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{RunArgs, RunConfig};

#[derive(Parser)]
#[command(name = "fibertwist", version, about = "Twist reconstruction in a birefringent fiber")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem and write the reflection traces.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Also write every grid node to field.csv.
        #[arg(long)]
        field: bool,
    },
    /// Recover the twist on the sensing depth from a trace file.
    Reconstruct {
        #[command(flatten)]
        run: RunArgs,
        /// Trace CSV (t,m1,m3). Without it the data are simulated from beta.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the oracle, energy, linearization and round-trip checks.
    Verify {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Convert field values and derivatives to characteristic variables.
    Transform(commands::TransformArgs),
}

/// A computation that ran but did not produce an acceptable result.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn is_numerical(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<NumericalFailure>()
            || matches!(
                e.downcast_ref::<fibertwist::Error>(),
                Some(fibertwist::Error::NoConvergence { .. } | fibertwist::Error::NonFiniteField { .. })
            )
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { run, field } => commands::simulate(&RunConfig::load(&run)?, field),
        Command::Reconstruct { run, trace } => commands::run_reconstruct(&RunConfig::load(&run)?, trace.as_deref()),
        Command::Verify { run } => commands::verify(&RunConfig::load(&run)?),
        Command::Transform(args) => commands::transform(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_numerical(&err) { 2 } else { 1 })
        }
    }
}
