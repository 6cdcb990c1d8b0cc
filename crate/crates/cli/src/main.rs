// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! `usp`: train, evaluate and compare universal state preparation policies.

mod commands;
mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use usp_core::config::{System, TargetName};

#[derive(Parser)]
#[command(name = "usp", version, about = "Deep-Q universal state preparation for singlet-triplet qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write its checkpoint.
    Train(Common),
    /// Design greedily for every test task with a trained checkpoint.
    Evaluate(Common),
    /// Design one task and write its trajectory.
    Design(DesignArgs),
    /// Replay clean designs under static and dynamic noise.
    NoiseSweep(Common),
    /// Run the GRAPE baseline over the test set.
    Baseline(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Single,
    Two,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Zero,
    One,
    Bell,
}

#[derive(Args, Clone)]
pub struct Common {
    /// TOML run configuration; fields left out take the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Used when no configuration file is given.
    #[arg(long, value_enum, default_value = "single")]
    system: SystemArg,
    /// Used when no configuration file is given.
    #[arg(long, value_enum)]
    target: Option<TargetArg>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "usp-out")]
    out: PathBuf,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Worker threads for evaluation; 0 picks one per core.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
pub struct DesignArgs {
    #[command(flatten)]
    common: Common,
    /// Polar angle of a single-qubit task, e.g. `5pi/6` or `2.61`.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Azimuth of a single-qubit task, e.g. `39pi/25`.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// A task in the exported line format, e.g. `hyper 0.39 0.78 1.17 0 1 2 3`.
    #[arg(long)]
    point: Option<String>,
    /// Also write the Bloch trail (default for one qubit; rejected for two).
    #[arg(long)]
    trail: bool,
}

impl Common {
    fn system(&self) -> System {
        match self.system {
            SystemArg::Single => System::Single,
            SystemArg::Two => System::Two,
        }
    }

    fn target(&self) -> TargetName {
        match (self.target, self.system) {
            (Some(TargetArg::Zero), _) => TargetName::Zero,
            (Some(TargetArg::One), _) => TargetName::One,
            (Some(TargetArg::Bell), _) | (None, SystemArg::Two) => TargetName::Bell,
            (None, SystemArg::Single) => TargetName::Zero,
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(c) => commands::train(&c),
        Command::Evaluate(c) => commands::evaluate(&c),
        Command::Design(d) => commands::design(&d),
        Command::NoiseSweep(c) => commands::noise_sweep(&c),
        Command::Baseline(c) => commands::baseline(&c),
    }
}
