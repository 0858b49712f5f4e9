//! Batch front-end: configuration, subcommands and exit-code mapping.

pub mod commands;
pub mod config;
pub mod error;

use std::path::Path;

pub use commands::Report;
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Model-error table for the parallel-linkage approximations.
    EvalPla,
    /// Feasible output-torque polygons over a joint grid.
    TorquePolytope,
    /// Start-state sampler driven by a synthetic difficulty profile.
    SamplerDemo,
    /// Parallel imitation episodes with a scripted policy.
    Rollout,
    /// Efficiency fit of the actuator model to a torque log.
    FitSpot,
    /// Self-consistent reference motions from forward simulation.
    GenReference,
}

/// Runs `command`; relative input paths in `cfg` resolve against `base`.
pub fn run(command: Command, cfg: &ExperimentConfig, base: &Path) -> CliResult<Report> {
    cfg.validate()?;
    match command {
        Command::EvalPla => commands::eval_pla(cfg, base),
        Command::TorquePolytope => commands::torque_polytope(cfg, base),
        Command::SamplerDemo => commands::sampler_demo(cfg, base),
        Command::Rollout => commands::rollout(cfg, base),
        Command::FitSpot => commands::fit_spot(cfg, base),
        Command::GenReference => commands::gen_reference(cfg, base),
    }
}
