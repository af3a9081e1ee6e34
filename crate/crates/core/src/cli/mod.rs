//! Command-line front end: scenario files in, CSV tables out.

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_adapt, cmd_analyze, cmd_capacity, cmd_simulate, Report, SLOPE_TOLERANCE};
pub use output::{fmt_num, ResultRow, ResultTable};
pub use scenario::{
    AdaptSection, AnalysisSection, ArrivalMode, CapacitySection, EnumerationMode, MembershipMode, RatesSection,
    Scenario, ScenarioFile, SimulateSection, StepMode,
};

#[derive(Debug, Parser)]
#[command(name = "csma-sic", version, about = "CSMA with successive interference cancellation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary distribution and throughput of the Markov chain.
    Analyze(RunArgs),
    /// Event-driven simulation of the protocol, compared against the chain.
    Simulate(RunArgs),
    /// Capacity-region membership of the `[capacity]` rate vector.
    Capacity(RunArgs),
    /// Gradient adaptation of the backoff rates toward `[adapt].targets`.
    Adapt(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file (TOML).
    pub scenario: PathBuf,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the simulated horizon (for `adapt`, sets the number of updates).
    #[arg(long)]
    pub horizon: Option<f64>,
}

impl Command {
    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Analyze(a) | Command::Simulate(a) | Command::Capacity(a) | Command::Adapt(a) => a,
        }
    }

    pub fn execute(&self) -> Result<Report> {
        let a = self.args();
        let s = Scenario::load(&a.scenario)?;
        match self {
            Command::Analyze(_) => cmd_analyze(&s),
            Command::Simulate(_) => cmd_simulate(&s, a.seed, a.horizon),
            Command::Capacity(_) => cmd_capacity(&s),
            Command::Adapt(_) => cmd_adapt(&s, a.seed, a.horizon),
        }
    }
}
