// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! Imperfections applied when replaying clean-designed pulse sequences:
//! static drifts and Gaussian fluctuations on the exchange (`J`, charge
//! noise) or Zeeman (`h`, nuclear noise) terms.
//!
//! Dynamic offsets are drawn once per slice and held for its duration. For
//! two qubits a static drift is shared by both qubits while dynamic offsets
//! are drawn independently per qubit.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, System};
use crate::env::{pulse_channels, pulse_hamiltonian, pulse_propagator, Environment};
use crate::error::{Error, Result};
use crate::quantum::{CMatrix, QuantumState, ZEEMAN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseChannel {
    J,
    H,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Static,
    Dynamic,
}

impl fmt::Display for NoiseChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseChannel::J => "J",
            NoiseChannel::H => "h",
        })
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Static => "static",
            NoiseKind::Dynamic => "dynamic",
        })
    }
}

/// `amplitude` is the drift `delta` (static) or the standard deviation
/// `sigma` (dynamic).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub channel: NoiseChannel,
    pub kind: NoiseKind,
    pub amplitude: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || (self.kind == NoiseKind::Dynamic && self.amplitude < 0.0) {
            return Err(Error::InvalidParameter {
                name: "amplitude",
                value: self.amplitude,
                reason: "must be finite (and >= 0 for dynamic noise)",
            });
        }
        Ok(())
    }
}

/// Per-slice offsets for qubit 1 and 2 (the second is unused for one qubit).
pub fn draw_offsets<R: Rng + ?Sized>(spec: &NoiseSpec, qubits: usize, rng: &mut R) -> [f64; 2] {
    if spec.amplitude == 0.0 {
        return [0.0; 2];
    }
    match spec.kind {
        NoiseKind::Static => [spec.amplitude; 2],
        NoiseKind::Dynamic => {
            let normal = Normal::new(0.0, spec.amplitude).expect("validated sigma");
            let first = normal.sample(rng);
            let second = if qubits > 1 { normal.sample(rng) } else { 0.0 };
            [first, second]
        }
    }
}

struct Perturbed {
    j: [f64; 2],
    h: [f64; 2],
    j12: f64,
}

fn perturb(system: System, pulse: &[f64], channel: NoiseChannel, offsets: [f64; 2], recompute_j12: bool) -> Perturbed {
    let base = pulse_channels(pulse);
    let base_j12 = base[0] * base[1] / 2.0;
    let mut j = base;
    let mut h = [ZEEMAN; 2];
    match channel {
        NoiseChannel::J => {
            j[0] += offsets[0];
            if system == System::Two {
                j[1] += offsets[1];
            }
        }
        NoiseChannel::H => {
            h[0] += offsets[0];
            if system == System::Two {
                h[1] += offsets[1];
            }
        }
    }
    let j12 = if recompute_j12 { j[0] * j[1] / 2.0 } else { base_j12 };
    Perturbed { j, h, j12 }
}

/// Hamiltonian of one slice of `pulse` with this slice's noise drawn from
/// `rng`.
pub fn perturbed_hamiltonian<R: Rng + ?Sized>(
    system: System,
    pulse: &[f64],
    spec: &NoiseSpec,
    rng: &mut R,
    recompute_j12: bool,
) -> CMatrix {
    let offsets = draw_offsets(spec, system.qubits(), rng);
    let p = perturb(system, pulse, spec.channel, offsets, recompute_j12);
    pulse_hamiltonian(system, p.j, p.h, p.j12)
}

/// Seeded noise stream for one replay.
#[derive(Clone, Debug)]
pub struct NoiseProcess {
    spec: NoiseSpec,
    rng: ChaCha8Rng,
    recompute_j12: bool,
}

impl NoiseProcess {
    pub fn new(spec: NoiseSpec, recompute_j12: bool) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec,
            recompute_j12,
        }
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    /// Zero amplitude: evolution is left untouched.
    pub fn is_silent(&self) -> bool {
        self.spec.amplitude == 0.0
    }

    pub fn hamiltonian(&mut self, system: System, pulse: &[f64]) -> CMatrix {
        perturbed_hamiltonian(system, pulse, &self.spec, &mut self.rng, self.recompute_j12)
    }

    pub fn propagator(&mut self, system: System, pulse: &[f64], dt: f64) -> CMatrix {
        let offsets = draw_offsets(&self.spec, system.qubits(), &mut self.rng);
        let p = perturb(system, pulse, self.spec.channel, offsets, self.recompute_j12);
        pulse_propagator(system, p.j, p.h, p.j12, dt)
    }
}

/// Largest fidelity along a replay of `actions` from `initial`, counting the
/// initial state.
pub fn replay_max_fidelity(
    env: &Environment,
    initial: &QuantumState,
    actions: &[usize],
    mut noise: Option<&mut NoiseProcess>,
) -> Result<f64> {
    let mut best = env.fidelity(initial)?;
    let mut state = initial.clone();
    for &a in actions {
        let out = env.step(&state, a, noise.as_deref_mut())?;
        best = best.max(out.fidelity);
        state = out.state;
    }
    Ok(best)
}

/// One row of a robustness sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub channel: NoiseChannel,
    pub kind: NoiseKind,
    pub amplitude: f64,
    pub realizations: usize,
    pub average_fidelity: f64,
    pub clean_average: f64,
}

/// A clean-designed task ready for noisy replay.
#[derive(Clone, Debug)]
pub struct DesignedTask {
    pub initial: QuantumState,
    pub actions: Vec<usize>,
    pub clean_max_fidelity: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Replays every task under each amplitude of the grid and averages the
/// per-task max fidelity. Static drifts are deterministic and use a single
/// realization, as does amplitude 0.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_under_noise(
    env: &Environment,
    tasks: &[DesignedTask],
    channel: NoiseChannel,
    kind: NoiseKind,
    amplitudes: &[f64],
    realizations: usize,
    master_seed: u64,
    recompute_j12: bool,
) -> Result<Vec<SweepRow>> {
    if realizations == 0 {
        return Err(Error::Config("noise.realizations: must be >= 1".into()));
    }
    let clean: Vec<f64> = tasks.iter().map(|t| t.clean_max_fidelity).collect();
    let clean_average = mean(&clean);
    let stream = derive_seed(master_seed, &format!("noise/{channel}/{kind}"));

    amplitudes
        .iter()
        .enumerate()
        .map(|(ai, &amplitude)| {
            let spec = NoiseSpec {
                channel,
                kind,
                amplitude,
                seed: 0,
            };
            spec.validate()?;
            let reps = if amplitude == 0.0 || kind == NoiseKind::Static { 1 } else { realizations };
            let per_task: Vec<f64> = tasks
                .par_iter()
                .enumerate()
                .map(|(ti, task)| {
                    if amplitude == 0.0 {
                        return Ok(task.clean_max_fidelity);
                    }
                    let fids = (0..reps)
                        .map(|r| {
                            let seed = derive_seed(stream, &format!("{ai}/{ti}/{r}"));
                            let mut process = NoiseProcess::new(NoiseSpec { seed, ..spec }, recompute_j12);
                            replay_max_fidelity(env, &task.initial, &task.actions, Some(&mut process))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(mean(&fids))
                })
                .collect::<Result<_>>()?;
            Ok(SweepRow {
                channel,
                kind,
                amplitude,
                realizations: reps,
                average_fidelity: mean(&per_task),
                clean_average,
            })
        })
        .collect()
}

/// Writes sweep rows as CSV with a header.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
