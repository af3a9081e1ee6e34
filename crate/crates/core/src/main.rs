use std::io::Write;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use csma_sic::cli::Cli;

fn run(cli: &Cli) -> Result<()> {
    let report = cli.command.execute()?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match &cli.command.args().out {
        Some(path) => {
            std::fs::write(path, &report.csv).with_context(|| format!("writing {}", path.display()))?;
            print!("{}", report.summary);
        }
        None => {
            eprint!("{}", report.summary);
            std::io::stdout().write_all(report.csv.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
