use anyhow::{Context, Result};
use clap::Parser;
use gridfield_cli::args::{Cli, Command};
use gridfield_cli::commands::{self, Outcome};
use gridfield_cli::output::emit;
use gridfield_cli::REPORT_VERSION;
use serde_json::json;
use std::process::ExitCode;

/// Exit code for a validate run whose checks failed.
const EXIT_CHECKS_FAILED: u8 = 2;

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("GRIDFIELD_THREADS") {
        let k: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&k| k > 0)
            .with_context(|| format!("GRIDFIELD_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    configure_threads()?;
    let cmd = &cli.command;
    let (outcome, out): (Outcome, _) = match cmd {
        Command::Simulate(a) => {
            emit(a.out.as_deref(), &commands::simulate(a)?)?;
            return Ok(true);
        }
        Command::Loglik(a) => (commands::loglik(a)?, a.out.as_deref()),
        Command::Estimate(a) => (commands::estimate(a)?, a.out.as_deref()),
        Command::Fisher(a) => (commands::fisher(a)?, a.out.as_deref()),
        Command::Validate(a) => (commands::validate(a)?, a.out.as_deref()),
        Command::Bench(a) => (commands::bench(a)?, a.out.as_deref()),
    };
    let report = json!({
        "report_version": REPORT_VERSION,
        "command": cmd.name(),
        "config": cmd,
        "result": outcome.result,
    });
    emit(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(outcome.success)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECKS_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
