// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! Gradient ascent pulse engineering over bounded piecewise-constant
//! exchange pulses, followed by snapping every slice to the nearest allowed
//! value.
//!
//! The state-transfer fidelity `F = |<target| U_N ... U_1 |initial>|^2` has
//! slice derivatives
//!
//! ```text
//! dF/dJ_k = 2 Re( conj(o) <chi_k| dU_k/dJ_k |psi_{k-1}> ),   o = <target|psi_N>
//! ```
//!
//! with forward states `psi` and back-propagated co-states `chi`. The slice
//! derivative `dU/dJ` is taken from the closed-form rotation for one qubit
//! and from the spectral divided-difference formula for two.

use std::time::Instant;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, System};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::quantum::{apply, h2_matrix, inner, su2_propagator, CMatrix, QuantumState, C64, ZEEMAN};
use crate::tasks::TaskPoint;
use crate::trainer::{ControlTrajectory, EvaluationReport, Histogram, Summary, TrajectoryRecord};

pub const GRAPE_TIMING_NOTE: &str = "wall-clock of the full per-task optimization including restarts and snapping";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrapeConfig {
    pub slices: usize,
    pub step_size: f64,
    pub max_iterations: usize,
    /// Stop once the projected gradient norm falls below this.
    pub tolerance: f64,
    pub restarts: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

impl Default for GrapeConfig {
    fn default() -> Self {
        Self::for_system(System::Single)
    }
}

impl GrapeConfig {
    pub fn for_system(system: System) -> Self {
        let (slices, lower_bound, upper_bound) = match system {
            System::Single => (40, 0.0, 3.0),
            System::Two => (400, 1.0, 5.0),
        };
        Self {
            slices,
            step_size: 0.1,
            max_iterations: 500,
            tolerance: 1e-6,
            restarts: 1,
            lower_bound,
            upper_bound,
        }
    }

    pub fn validate(&self, system: System) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("grape.{field}: {why}")));
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad("step_size", "must be > 0");
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return bad("tolerance", "must be >= 0");
        }
        if self.restarts == 0 {
            return bad("restarts", "must be >= 1");
        }
        if !(self.lower_bound.is_finite() && self.upper_bound.is_finite() && self.lower_bound <= self.upper_bound) {
            return bad("lower_bound", "bounds must be finite with lower <= upper");
        }
        if system == System::Two && self.lower_bound <= 0.0 {
            return bad("lower_bound", "two-qubit exchange must stay > 0");
        }
        if system == System::Single && self.lower_bound < 0.0 {
            return bad("lower_bound", "exchange must stay >= 0");
        }
        Ok(())
    }
}

/// Slice-major values: slice `k`, channel `c` lives at `k * channels + c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPulseSequence {
    pub channels: usize,
    pub values: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl ContinuousPulseSequence {
    pub fn slices(&self) -> usize {
        self.values.len() / self.channels.max(1)
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        &self.values[k * self.channels..(k + 1) * self.channels]
    }

    fn clamp(&mut self) {
        let (lo, hi) = (self.lower, self.upper);
        self.values.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    }
}

/// Slice propagator and its derivative with respect to every channel.
fn slice_propagator_and_derivatives(system: System, pulse: &[f64], dt: f64) -> (CMatrix, Vec<CMatrix>) {
    match system {
        System::Single => {
            let (j, h) = (pulse[0], ZEEMAN);
            let u = su2_propagator(j, h, dt);
            let omega = j.hypot(h);
            let d = if omega < 1e-12 {
                // limit of the rotation at vanishing frequency
                CMatrix::from_row_slice(2, 2, &[C64::new(0.0, -dt), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, dt)])
            } else {
                let (s, c) = (omega * dt).sin_cos();
                let d_omega = j / omega;
                let d_cos = -s * dt * d_omega;
                let k = s / omega;
                let d_k = (dt * c * omega - s) / (omega * omega) * d_omega;
                // U = cos I - i k (J sz + h sx)
                let diag = C64::new(d_cos, -(d_k * j + k));
                let off = C64::new(0.0, -d_k * h);
                CMatrix::from_row_slice(2, 2, &[diag, off, off, C64::new(d_cos, d_k * j + k)])
            };
            (u, vec![d])
        }
        System::Two => {
            let (j1, j2) = (pulse[0], pulse[1]);
            let h = h2_matrix(j1, j2, ZEEMAN, ZEEMAN, j1 * j2 / 2.0);
            let eig = SymmetricEigen::new(h);
            let v = eig.eigenvectors;
            let lambda = eig.eigenvalues;
            let n = lambda.len();
            let phase: Vec<C64> = lambda.iter().map(|&l| C64::new(0.0, -l * dt).exp()).collect();
            let mut u = CMatrix::zeros(n, n);
            for (m, &p) in phase.iter().enumerate() {
                let col = v.column(m);
                u += &col * col.adjoint() * p;
            }
            let half = |x: f64| C64::new(0.5 * x, 0.0);
            let d_h = [
                CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![half(1.0), half(1.0), half(-1.0), half(-1.0 + j2)])),
                CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![half(1.0), half(-1.0), half(1.0), half(-1.0 + j1)])),
            ];
            let derivs = d_h
                .iter()
                .map(|dh| {
                    let mut g = v.adjoint() * dh * &v;
                    for r in 0..n {
                        for c in 0..n {
                            let gap = lambda[r] - lambda[c];
                            let w = if gap.abs() > 1e-10 {
                                (phase[r] - phase[c]) / gap
                            } else {
                                C64::new(0.0, -dt) * phase[r]
                            };
                            g[(r, c)] *= w;
                        }
                    }
                    &v * g * v.adjoint()
                })
                .collect();
            (u, derivs)
        }
    }
}

/// Final-time fidelity of `seq` and its exact gradient (same layout as
/// `seq.values`).
pub fn grape_fidelity_and_gradient(
    seq: &ContinuousPulseSequence,
    system: System,
    initial: &QuantumState,
    target: &QuantumState,
    dt: f64,
) -> Result<(f64, Vec<f64>)> {
    if initial.dim() != system.dim() || target.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: initial.dim().max(target.dim()),
        });
    }
    if seq.channels != system.qubits() || seq.values.len() % seq.channels != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} channels and {} values for a {}-qubit system",
            seq.channels,
            seq.values.len(),
            system.qubits()
        )));
    }
    let n = seq.slices();
    let mut props = Vec::with_capacity(n);
    let mut derivs = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n + 1);
    psi.push(initial.amplitudes().to_vec());
    for k in 0..n {
        let (u, d) = slice_propagator_and_derivatives(system, seq.slice(k), dt);
        psi.push(apply(&u, &psi[k]));
        props.push(u);
        derivs.push(d);
    }
    let overlap = inner(target.amplitudes(), &psi[n]);
    let fid = overlap.norm_sqr();

    let mut grad = vec![0.0; seq.values.len()];
    let mut chi = target.amplitudes().to_vec();
    for k in (0..n).rev() {
        for (c, d) in derivs[k].iter().enumerate() {
            let moved = apply(d, &psi[k]);
            grad[k * seq.channels + c] = 2.0 * (overlap.conj() * inner(&chi, &moved)).re;
        }
        chi = apply(&props[k].adjoint(), &chi);
    }
    Ok((fid, grad))
}

fn projected_norm(seq: &ContinuousPulseSequence, grad: &[f64]) -> f64 {
    seq.values
        .iter()
        .zip(grad)
        .map(|(&x, &g)| {
            let blocked = (x <= seq.lower && g < 0.0) || (x >= seq.upper && g > 0.0);
            if blocked {
                0.0
            } else {
                g * g
            }
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrapeOutcome {
    pub sequence: ContinuousPulseSequence,
    pub fidelity: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Fidelity after every accepted step, starting from the initial guess.
    pub log: Vec<f64>,
}

/// Projected gradient ascent with a backtracking step from a uniform random
/// start; the best of `cfg.restarts` runs is kept.
pub fn grape_optimize(
    system: System,
    initial: &QuantumState,
    target: &QuantumState,
    dt: f64,
    cfg: &GrapeConfig,
    seed: u64,
) -> Result<GrapeOutcome> {
    cfg.validate(system)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = system.qubits();
    let mut best: Option<GrapeOutcome> = None;
    for _ in 0..cfg.restarts {
        let values = (0..cfg.slices * channels)
            .map(|_| {
                if cfg.lower_bound == cfg.upper_bound {
                    cfg.lower_bound
                } else {
                    rng.random_range(cfg.lower_bound..=cfg.upper_bound)
                }
            })
            .collect();
        let start = ContinuousPulseSequence {
            channels,
            values,
            lower: cfg.lower_bound,
            upper: cfg.upper_bound,
        };
        let run = ascend(start, system, initial, target, dt, cfg)?;
        if best.as_ref().is_none_or(|b| run.fidelity > b.fidelity) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn ascend(
    mut seq: ContinuousPulseSequence,
    system: System,
    initial: &QuantumState,
    target: &QuantumState,
    dt: f64,
    cfg: &GrapeConfig,
) -> Result<GrapeOutcome> {
    let (mut fid, mut grad) = grape_fidelity_and_gradient(&seq, system, initial, target, dt)?;
    let mut log = vec![fid];
    let mut step = cfg.step_size;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        if projected_norm(&seq, &grad) < cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        while step > 1e-12 {
            let mut trial = seq.clone();
            trial.values.iter_mut().zip(&grad).for_each(|(x, g)| *x += step * g);
            trial.clamp();
            let (f_trial, g_trial) = grape_fidelity_and_gradient(&trial, system, initial, target, dt)?;
            if f_trial >= fid {
                seq = trial;
                fid = f_trial;
                grad = g_trial;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
        log.push(fid);
    }
    Ok(GrapeOutcome {
        sequence: seq,
        fidelity: fid,
        iterations,
        converged,
        log,
    })
}

/// Index of the alphabet value nearest to `v`; ties go to the smaller value.
fn nearest(alphabet: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (i, &a) in alphabet.iter().enumerate().skip(1) {
        let (d, d_best) = ((v - a).abs(), (v - alphabet[best]).abs());
        if d < d_best || (d == d_best && a < alphabet[best]) {
            best = i;
        }
    }
    best
}

/// Snaps every slice to the alphabet, channel by channel, and returns action
/// indices in the environment's ordering.
pub fn discretize_to_allowed(seq: &ContinuousPulseSequence, alphabet: &[f64]) -> Result<Vec<usize>> {
    if alphabet.is_empty() {
        return Err(Error::Config("allowed_actions: alphabet must not be empty".into()));
    }
    let n = alphabet.len();
    Ok((0..seq.slices())
        .map(|k| seq.slice(k).iter().fold(0, |idx, &v| idx * n + nearest(alphabet, v)))
        .collect())
}

/// Optimizes, snaps and replays one task.
pub fn grape_design(env: &Environment, initial: &QuantumState, cfg: &GrapeConfig, seed: u64) -> Result<(TrajectoryRecord, GrapeOutcome)> {
    let started = Instant::now();
    let system = env.system();
    let initial_fidelity = env.fidelity(initial)?;
    let outcome = if initial_fidelity >= env.threshold() {
        GrapeOutcome {
            sequence: ContinuousPulseSequence {
                channels: system.qubits(),
                values: Vec::new(),
                lower: cfg.lower_bound,
                upper: cfg.upper_bound,
            },
            fidelity: initial_fidelity,
            iterations: 0,
            converged: true,
            log: vec![initial_fidelity],
        }
    } else {
        grape_optimize(system, initial, env.target(), env.dt(), cfg, seed)?
    };
    let actions = discretize_to_allowed(&outcome.sequence, &env.actions().values)?;

    let mut traj = ControlTrajectory {
        actions: Vec::new(),
        pulses: Vec::new(),
        fidelity_per_step: Vec::new(),
        initial_fidelity,
        final_fidelity: initial_fidelity,
        max_fidelity: initial_fidelity,
        max_fidelity_step: 0,
        steps: 0,
    };
    let mut state = initial.clone();
    for &a in &actions {
        let out = env.step(&state, a, None)?;
        traj.actions.push(a);
        traj.pulses.push(env.actions().pulse(a)?);
        traj.fidelity_per_step.push(out.fidelity);
        traj.steps += 1;
        traj.final_fidelity = out.fidelity;
        if out.fidelity > traj.max_fidelity {
            traj.max_fidelity = out.fidelity;
            traj.max_fidelity_step = traj.steps;
        }
        state = out.state;
    }
    let elapsed = started.elapsed().as_secs_f64();
    let record = TrajectoryRecord {
        task_index: 0,
        point: None,
        method: "grape".into(),
        fidelity: traj.final_fidelity,
        actions: traj.actions,
        pulses: traj.pulses,
        fidelity_per_step: traj.fidelity_per_step,
        max_fidelity: traj.max_fidelity,
        max_fidelity_step: traj.max_fidelity_step,
        final_fidelity: traj.final_fidelity,
        steps: traj.steps,
        design_time_secs: elapsed,
        continuous_fidelity: Some(outcome.fidelity),
        iterations: Some(outcome.iterations),
    };
    Ok((record, outcome))
}

/// Runs [`grape_design`] over every task with per-task seeds.
pub fn grape_baseline(
    env: &Environment,
    tasks: &[(Option<TaskPoint>, QuantumState)],
    cfg: &GrapeConfig,
    master_seed: u64,
    bins: usize,
) -> Result<EvaluationReport> {
    let records: Vec<TrajectoryRecord> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, (point, initial))| {
            let seed = derive_seed(master_seed, &format!("grape/{i}"));
            grape_design(env, initial, cfg, seed).map(|(mut r, _)| {
                r.task_index = i;
                r.point = *point;
                r
            })
        })
        .collect::<Result<_>>()?;
    let fids: Vec<f64> = records.iter().map(|r| r.fidelity).collect();
    Ok(EvaluationReport {
        summary: Summary::of("grape", &records, env.threshold(), GRAPE_TIMING_NOTE),
        histogram: Histogram::of_fidelities(&fids, bins),
        records,
    })
}
