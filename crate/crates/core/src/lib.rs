// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! Universal state preparation for singlet-triplet qubits.
//!
//! A deep Q-network is trained over many initial states to pick discrete
//! exchange pulses that steer any initial state towards one fixed target.
//! The crate also provides the exact pulse simulator, the training and test
//! point sets, a GRAPE baseline and a post-hoc noise laboratory.

pub mod config;
pub mod dqn;
pub mod env;
pub mod error;
pub mod grape;
pub mod nn;
pub mod noise;
pub mod pipeline;
pub mod quantum;
pub mod tasks;
pub mod trainer;

pub use config::{AgentConfig, RunConfig, System, TargetName};
pub use env::Environment;
pub use error::{Error, Result};
pub use nn::{Checkpoint, LayerSpec, Network};
pub use quantum::QuantumState;
