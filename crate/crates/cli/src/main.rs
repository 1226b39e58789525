//! `fpprace`: two-type first-passage competition on configuration-model
//! random graphs.
//!
//! Subcommands: `generate` samples a graph, `compete` runs one race to
//! termination, `ensemble` runs a replicated experiment with windowed
//! martingale diagnostics, `branching` runs the continuous-time pair oracle,
//! and `verify` runs the self-check battery.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime error,
//! 3 verification failure.

mod commands;
mod config;
mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{BranchingMode, CommonArgs, Settings};
use verify::{VerifyLevel, DEFAULT_VERIFY_SEED};

#[derive(Parser)]
#[command(
    name = "fpprace",
    version,
    about = "Two-type first-passage competition on configuration-model graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one configuration-model graph and write its edge list.
    Generate(CommonArgs),
    /// Run one competition to termination.
    Compete(CommonArgs),
    /// Run a replicated competition experiment with windowed statistics.
    Ensemble(CommonArgs),
    /// Run branching-pair experiments: trajectory, limit fraction, coupling.
    Branching(BranchingArgs),
    /// Run the self-check battery against the built-in oracles.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct BranchingArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// What to produce: one pair trajectory, replicated limit-fraction
    /// probes, or a small-time comparison against the exploration engine.
    #[arg(long, value_enum)]
    mode: Option<BranchingMode>,
    /// Trajectory horizon (trajectory mode).
    #[arg(long)]
    t_end: Option<f64>,
    /// Probe time (v and coupling modes); defaults so the expected
    /// population reaches n^(1/4).
    #[arg(long)]
    t_probe: Option<f64>,
    /// Initial population of type 1.
    #[arg(long)]
    a1: Option<u64>,
    /// Initial population of type 2.
    #[arg(long)]
    a2: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Battery scale: fast finishes in under a minute, full adds the
    /// large-instance statistical suites.
    #[arg(long, value_enum, default_value_t = VerifyLevel::Fast)]
    level: VerifyLevel,
    /// Battery seed; the default pins a reproducible suite.
    #[arg(long, default_value_t = DEFAULT_VERIFY_SEED)]
    seed: u64,
    /// Directory for the JSON verification report (stdout only when absent).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version land here; they are not errors.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Generate(args) => resolve_and(&args, "generate", commands::cmd_generate),
        Command::Compete(args) => resolve_and(&args, "compete", commands::cmd_compete),
        Command::Ensemble(args) => resolve_and(&args, "ensemble", commands::cmd_ensemble),
        Command::Branching(args) => run_branching(&args),
        Command::Verify(args) => return verify::run(args.level, args.seed, args.out.as_ref()),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn resolve_and(
    args: &CommonArgs,
    subcommand: &str,
    f: impl Fn(&Settings) -> Result<(), config::CliError>,
) -> Result<(), config::CliError> {
    let settings = config::resolve(subcommand, args)?;
    f(&settings)
}

fn run_branching(args: &BranchingArgs) -> Result<(), config::CliError> {
    let mut settings = config::resolve("branching", &args.common)?;
    // Branching flags override the config section, like every other flag.
    let b = &mut settings.branching;
    if let Some(mode) = args.mode {
        b.mode = mode;
    }
    if let Some(t_end) = args.t_end {
        b.t_end = t_end;
    }
    if let Some(t_probe) = args.t_probe {
        b.t_probe = Some(t_probe);
    }
    if let Some(a1) = args.a1 {
        b.a1 = a1;
    }
    if let Some(a2) = args.a2 {
        b.a2 = a2;
    }
    for (name, value) in [("--t-end", b.t_end), ("--t-probe", b.t_probe.unwrap_or(0.0))] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(config::CliError::validation(format!(
                "{name} must be a nonnegative finite number, got {value}"
            )));
        }
    }
    if b.a1 == 0 || b.a2 == 0 {
        return Err(config::CliError::validation(
            "initial populations must be at least 1",
        ));
    }
    commands::cmd_branching(&settings)
}
