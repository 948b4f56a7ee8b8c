//! Command-line front end for semantic-density scoring and evaluation.
//!
//! Exit codes: 0 on success, 1 on invalid input (or skipped lines under
//! `--keep-going`), 2 on I/O failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, Status};
use config::{CommonArgs, RunConfig};
use semdensity::Execution;

#[derive(Debug, Parser)]
#[command(
    name = "semdensity",
    version,
    about = "Semantic-density confidence scores for LLM responses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every response of every record; writes score JSONL.
    Score(CommonArgs),
    /// AUROC and AUPR per (dataset, model) and metric; writes tables to a directory.
    Eval(CommonArgs),
    /// Semantic-density AUROC as the number of reference responses grows.
    Ablate(CommonArgs),
    /// AUROC per metric across Rouge-L correctness thresholds.
    Sweep(CommonArgs),
    /// Paired t-tests between metric columns of an AUROC table.
    Ttest(CommonArgs),
    /// Scores, tables, ablation, sweep and t-tests in one directory.
    Report(CommonArgs),
}

fn execution(jobs: usize) -> Result<Execution, Failure> {
    if jobs == 1 {
        return Ok(Execution::Sequential);
    }
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Validation(anyhow::anyhow!("thread pool: {e}")))?;
    }
    Ok(Execution::Parallel)
}

fn run(command: Command) -> Result<Status, Failure> {
    let (Command::Score(args)
    | Command::Eval(args)
    | Command::Ablate(args)
    | Command::Sweep(args)
    | Command::Ttest(args)
    | Command::Report(args)) = &command;
    let cfg = RunConfig::resolve(args.clone()).map_err(Failure::Validation)?;
    let exec = execution(cfg.jobs)?;
    match command {
        Command::Score(_) => commands::score(&cfg, exec),
        Command::Eval(_) => commands::eval(&cfg, exec),
        Command::Ablate(_) => commands::ablate(&cfg, exec),
        Command::Sweep(_) => commands::sweep(&cfg, exec),
        Command::Ttest(_) => commands::ttest(&cfg),
        Command::Report(_) => commands::report(&cfg, exec),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match run(cli.command) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
