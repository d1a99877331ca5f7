//! Command-line front end for the `conic-game` crate: configuration,
//! bundled scenarios, exporters and the subcommands.

pub mod commands;
pub mod config;
pub mod export;
pub mod scenario;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Config, Format, Overrides};

#[derive(Debug, Parser)]
#[command(name = "conicgame", version, about = "Surveillance-evasion game between two Dubins cars")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tables of the usable part, its boundary and the apex line
    Up,
    /// Optimal trajectories over the seed grid
    Synth,
    /// Barrier trajectories and the emanation table
    Barrier,
    /// Play a scenario forward in the plane
    Simulate {
        /// Bundled scenario name (sim1..sim5) or path to a scenario file
        #[arg(long)]
        scenario: String,
    },
    /// Run the check suite
    Validate {
        /// Also re-check trajectories exported to this directory
        #[arg(long)]
        check_dir: Option<PathBuf>,
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb: f64,
    },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> anyhow::Result<i32> {
    let config = Config::resolve(&cli.overrides)?;
    match &cli.command {
        Command::Up => {
            commands::cmd_up(&config)?;
        }
        Command::Synth => {
            let m = commands::cmd_synth(&config)?;
            if !m.failures.is_empty() {
                log::warn!("{} seeds failed", m.failures.len());
            }
        }
        Command::Barrier => {
            commands::cmd_barrier(&config)?;
        }
        Command::Simulate { scenario } => {
            let s = commands::cmd_simulate(&config, scenario)?;
            println!("{}: escape_time = {:.4} s, escaped = {}", s.name, s.escape_time, s.escaped);
        }
        Command::Validate { check_dir, perturb } => {
            let report = commands::cmd_validate(&config, check_dir.as_deref(), *perturb)?;
            for c in &report.checks {
                let mark = if c.passed { "PASS" } else { "FAIL" };
                println!("{mark} {:32} max_error={:.3e} tol={:.1e}", c.name, c.max_error, c.tolerance);
            }
            if !report.all_passed() {
                return Ok(EXIT_VALIDATION);
            }
        }
    }
    Ok(EXIT_OK)
}
