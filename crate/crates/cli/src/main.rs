// SPDX-License-Identifier: Apache-2.0

use clap::{Parser, ValueEnum};
use gue_relax_cli::{resolve, run, CliError, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Spectrum,
    Evolve,
    Vanhove,
    Montecarlo,
    Compare,
    Equilibrium,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Spectrum => Subcommand::Spectrum,
            Command::Evolve => Subcommand::Evolve,
            Command::Vanhove => Subcommand::Vanhove,
            Command::Montecarlo => Subcommand::Montecarlo,
            Command::Compare => Subcommand::Compare,
            Command::Equilibrium => Subcommand::Equilibrium,
        }
    }
}

/// Run a two-level relaxation experiment and write CSV, a JSON manifest and
/// optional SVG plots.
///
/// Exit codes: 0 success, 1 other failure, 2 invalid input, 3 solver or
/// quadrature failure, 4 `compare` deviation above threshold.
#[derive(Debug, Parser)]
#[command(name = "gue-relax", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-path override, e.g. `--set time.stop=5`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Also render SVG plots.
    #[arg(long)]
    plot: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<u8, CliError> {
    let cfg = resolve(args.config.as_deref(), &args.set, args.seed, args.out.as_deref())?;
    let outcome = run(args.command.into(), &cfg, args.plot)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", outcome.manifest_path.display());
    if outcome.breach {
        eprintln!(
            "deviation {} exceeds threshold {}",
            outcome.manifest.diagnostics["max_deviation"], cfg.compare.threshold
        );
        return Ok(4);
    }
    Ok(0)
}
