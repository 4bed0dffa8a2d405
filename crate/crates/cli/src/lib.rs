//! `minerdyn` command-line front end: one subcommand per analysis, each
//! driven by a TOML scenario file and writing CSV.
//!
//! Exit codes: 0 ok, 1 i/o, 2 config, 3 numerical failure, 4 infeasible controller.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Scenario, ScenarioConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "minerdyn",
    version,
    about = "Replicator dynamics of mining participation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,

    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Override a scalar config field, e.g. `--set reward.R=60`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibria, stability labels, region and basins at the configured reward.
    Equilibria(Common),
    /// Integrate one trajectory (t, x1, R).
    Simulate(Common),
    /// Equilibrium branches over a reward range.
    Bifurcate(Common),
    /// Region tags over the (m, R/d) plane.
    RegionMap(Common),
    /// Quasi-static reward sweep; `direction = "both"` writes `<out>_up` and `<out>_down`.
    Sweep(Common),
    /// Design or check a reward feedback law.
    Controller {
        #[command(subcommand)]
        action: ControllerAction,
    },
    /// Finite-population simulation; writes the seed aggregate and, with
    /// `--out`, the per-seed runs to `<out>_runs`.
    Agents(AgentsArgs),
}

#[derive(Debug, Subcommand)]
pub enum ControllerAction {
    /// Pick K and eps, print the design bounds and optionally write the spec.
    Synth(Common),
    /// Check a spec from `--spec` (CSV) or from the config's controller table.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, required_unless_present = "spec")]
    pub config: Option<PathBuf>,

    #[arg(long, conflicts_with = "config")]
    pub spec: Option<PathBuf>,

    #[arg(long = "set", value_name = "PATH=VALUE", requires = "config")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct AgentsArgs {
    #[command(flatten)]
    pub common: Common,

    /// First RNG seed; runs use consecutive seeds from here.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Number of seeds, overriding `agents.seeds`.
    #[arg(long)]
    pub runs: Option<usize>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Equilibria(c) => commands::equilibria(&c),
        Command::Simulate(c) => commands::simulate(&c),
        Command::Bifurcate(c) => commands::bifurcate(&c),
        Command::RegionMap(c) => commands::region_map(&c),
        Command::Sweep(c) => commands::sweep(&c),
        Command::Controller {
            action: ControllerAction::Synth(c),
        } => commands::controller_synth(&c),
        Command::Controller {
            action: ControllerAction::Validate(v),
        } => commands::controller_validate(&v),
        Command::Agents(a) => commands::agents(&a),
    }
}
