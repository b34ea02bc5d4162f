//! Command-line driver for the regularized three-body toolkit.
//!
//! Five subcommands expose the library's main operations:
//!
//! * `verify` — recompute the anchored reference quantities and compare
//!   them against their closed forms (exit `0` only if all pass);
//! * `simulate` — integrate the regularized flow from a hierarchical
//!   element set, with conservation monitors and near-collision events;
//! * `portrait` — phase portraits of the reduced quadrupolar system, on
//!   and off the branched double cover;
//! * `average` — double-average the coupling at a secular point and
//!   compare against its ratio expansion;
//! * `torsion` — tabulate frequency coefficients and torsion over a
//!   momentum grid.
//!
//! All commands read a flat `key = value` configuration file
//! (`--config`), write deterministic CSV/JSON results into `--out`, and
//! derive any sampling from the `--seed` value, so reruns are
//! byte-identical.  Exit codes: `0` success, `1` verification check
//! failure, `2` configuration error, `3` physically inadmissible input.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "lunar3b",
    version,
    about = "Numerical toolkit for the regularized spatial three-body problem in the lunar regime"
)]
struct Cli {
    /// Flat `key = value` configuration file; omitted keys take
    /// documented defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory where CSV/JSON results are written.
    #[arg(long, global = true, value_name = "DIR", default_value = "lunar3b-out")]
    out: PathBuf,
    /// Seed of the deterministic sampling generator.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recompute anchored reference quantities and compare against
    /// closed forms; exits 0 only if every check passes.
    Verify,
    /// Integrate the regularized flow from a hierarchical element set.
    Simulate,
    /// Phase portraits of the reduced quadrupolar system.
    Portrait,
    /// Double-average the coupling and compare against its expansion.
    Average,
    /// Tabulate frequency coefficients and torsion over a grid.
    Torsion,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => match config::RunConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: configuration: {e}");
                return ExitCode::from(2);
            }
        },
        None => config::RunConfig::empty(),
    };
    let outcome = match cli.command {
        Command::Verify => commands::verify::run(&cfg, &cli.out, cli.seed),
        Command::Simulate => commands::simulate::run(&cfg, &cli.out, cli.seed),
        Command::Portrait => commands::portrait::run(&cfg, &cli.out, cli.seed),
        Command::Average => commands::average::run(&cfg, &cli.out, cli.seed),
        Command::Torsion => commands::torsion::run(&cfg, &cli.out, cli.seed),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
