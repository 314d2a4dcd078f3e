//! Experiment runner for robust Lyapunov certificate learning.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lyacert_cli::commands::{cmd_bounds, cmd_evaluate, cmd_train, cmd_verify, CmdError};
use lyacert_cli::config;

#[derive(Parser)]
#[command(name = "lyacert", version, about = "Train, evaluate, and bound robust Lyapunov stability certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap the worker pool; never changes results.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a nominal or adversarially robust certificate.
    Train(CommonArgs),
    /// Sweep satisfaction rates of trained certificates over perturbation
    /// classes.
    Evaluate(CommonArgs),
    /// Evaluate the deviation / Rademacher / generalization bound clauses.
    Bounds(CommonArgs),
    /// Run the built-in verification property suite.
    Verify(CommonArgs),
}

fn run(args: &CommonArgs, go: impl FnOnce(&CommonArgs) -> Result<(), CmdError>) -> ExitCode {
    if let Some(n) = args.threads {
        if let Err(e) = lyacert::exec::configure_threads(n) {
            // A pool may already exist (e.g. repeated invocation in-process);
            // the cap is best-effort and never affects results.
            eprintln!("warning: could not set thread pool size: {e}");
        }
    }
    match go(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => run(&args, |a| {
            let file = config::load(&a.config).map_err(CmdError::Config)?;
            cmd_train(file, a.out.clone(), a.seed)
        }),
        Command::Evaluate(args) => run(&args, |a| {
            let file = config::load(&a.config).map_err(CmdError::Config)?;
            cmd_evaluate(file, a.out.clone(), a.seed)
        }),
        Command::Bounds(args) => run(&args, |a| {
            let file = config::load(&a.config).map_err(CmdError::Config)?;
            cmd_bounds(file, a.out.clone(), a.seed)
        }),
        Command::Verify(args) => run(&args, |a| {
            let file = config::load(&a.config).map_err(CmdError::Config)?;
            cmd_verify(file, a.out.clone(), a.seed)
        }),
    }
}
