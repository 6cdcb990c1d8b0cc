// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! Preparation environment: applies one pulse slice, scores the result
//! against the target and decides termination.

use serde::{Deserialize, Serialize};

use crate::config::{AgentConfig, System};
use crate::error::{Error, Result};
use crate::noise::NoiseProcess;
use crate::quantum::{
    apply, fidelity, h2_matrix, spectral_propagator, su2_propagator, CMatrix, QuantumState, SingleQubitParams,
    TwoQubitParams, ZEEMAN,
};

pub const SUCCESS_THRESHOLD: f64 = 0.99;
pub const MAX_REWARD: f64 = 5000.0;

fn check_fidelity(f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::InvalidParameter {
            name: "F",
            value: f,
            reason: "fidelity must lie in [0, 1]",
        });
    }
    Ok(())
}

/// `100 F^3` below 0.99, 5000 from 0.99 on.
pub fn reward_single(f: f64) -> Result<f64> {
    check_fidelity(f)?;
    Ok(if f < SUCCESS_THRESHOLD { 100.0 * f * f * f } else { MAX_REWARD })
}

/// `1000 F` below 0.99, 5000 from 0.99 on.
pub fn reward_two(f: f64) -> Result<f64> {
    check_fidelity(f)?;
    Ok(if f < SUCCESS_THRESHOLD { 1000.0 * f } else { MAX_REWARD })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardFn {
    pub system: System,
    pub threshold: f64,
    pub max_reward: f64,
}

impl RewardFn {
    pub fn reward(&self, f: f64) -> Result<f64> {
        check_fidelity(f)?;
        if f >= self.threshold {
            return Ok(self.max_reward);
        }
        Ok(match self.system {
            System::Single => 100.0 * f * f * f,
            System::Two => 1000.0 * f,
        })
    }
}

/// Discrete pulse alphabet. Two-qubit index is `i1 * n + i2` over the
/// per-channel values, i.e. `5 (J1 - 1) + (J2 - 1)` for `{1..5}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    pub system: System,
    pub values: Vec<f64>,
}

impl ActionSet {
    pub fn len(&self) -> usize {
        self.values.len().pow(self.system.qubits() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn pulse(&self, index: usize) -> Result<Vec<f64>> {
        if index >= self.len() {
            return Err(Error::InvalidAction {
                index,
                count: self.len(),
            });
        }
        let n = self.values.len();
        Ok(match self.system {
            System::Single => vec![self.values[index]],
            System::Two => vec![self.values[index / n], self.values[index % n]],
        })
    }
}

/// Hamiltonian of a pulse with explicit per-qubit exchange and Zeeman terms.
pub(crate) fn pulse_hamiltonian(system: System, j: [f64; 2], h: [f64; 2], j12: f64) -> CMatrix {
    match system {
        System::Single => crate::quantum::h1_matrix(j[0], h[0]),
        System::Two => h2_matrix(j[0], j[1], h[0], h[1], j12),
    }
}

pub(crate) fn pulse_propagator(system: System, j: [f64; 2], h: [f64; 2], j12: f64, dt: f64) -> CMatrix {
    match system {
        System::Single => su2_propagator(j[0], h[0], dt),
        System::Two => spectral_propagator(&h2_matrix(j[0], j[1], h[0], h[1], j12), dt),
    }
}

pub(crate) fn pulse_channels(pulse: &[f64]) -> [f64; 2] {
    [pulse[0], pulse.get(1).copied().unwrap_or(0.0)]
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: QuantumState,
    pub reward: f64,
    pub fidelity: f64,
    pub terminal: bool,
}

/// Fixed target, fixed alphabet, fixed slice duration.
#[derive(Clone, Debug)]
pub struct Environment {
    system: System,
    target: QuantumState,
    actions: ActionSet,
    dt: f64,
    reward: RewardFn,
    propagators: Vec<CMatrix>,
}

impl Environment {
    pub fn new(system: System, target: QuantumState, cfg: &AgentConfig) -> Result<Self> {
        if target.dim() != system.dim() {
            return Err(Error::DimensionMismatch {
                expected: system.dim(),
                found: target.dim(),
            });
        }
        cfg.validate(system)?;
        let actions = ActionSet {
            system,
            values: cfg.allowed_actions.clone(),
        };
        let dt = cfg.action_duration;
        let propagators = (0..actions.len())
            .map(|a| {
                let pulse = actions.pulse(a)?;
                let j = pulse_channels(&pulse);
                let j12 = match system {
                    System::Single => {
                        SingleQubitParams::new(j[0])?;
                        0.0
                    }
                    System::Two => TwoQubitParams::new(j[0], j[1])?.j12,
                };
                Ok(pulse_propagator(system, j, [ZEEMAN; 2], j12, dt))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            system,
            target,
            actions,
            dt,
            reward: RewardFn {
                system,
                threshold: cfg.success_threshold,
                max_reward: cfg.max_reward,
            },
            propagators,
        })
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn target(&self) -> &QuantumState {
        &self.target
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn reward_fn(&self) -> &RewardFn {
        &self.reward
    }

    pub fn threshold(&self) -> f64 {
        self.reward.threshold
    }

    /// Clean slice propagator of `action`.
    pub fn propagator(&self, action: usize) -> Result<&CMatrix> {
        self.propagators.get(action).ok_or(Error::InvalidAction {
            index: action,
            count: self.propagators.len(),
        })
    }

    pub fn fidelity(&self, s: &QuantumState) -> Result<f64> {
        fidelity(&self.target, s)
    }

    /// Applies `action` for one slice, optionally under noise.
    pub fn step(&self, s: &QuantumState, action: usize, noise: Option<&mut NoiseProcess>) -> Result<StepOutcome> {
        if s.dim() != self.system.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.system.dim(),
                found: s.dim(),
            });
        }
        let clean = self.propagator(action)?;
        let next = match noise {
            Some(process) if !process.is_silent() => {
                let pulse = self.actions.pulse(action)?;
                let u = process.propagator(self.system, &pulse, self.dt);
                apply(&u, s.amplitudes())
            }
            _ => apply(clean, s.amplitudes()),
        };
        let state = QuantumState::from_raw(next);
        let f = self.fidelity(&state)?;
        let reward = self.reward.reward(f)?;
        Ok(StepOutcome {
            state,
            reward,
            fidelity: f,
            terminal: f >= self.reward.threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseChannel, NoiseKind, NoiseSpec};
    use std::f64::consts::PI;

    fn single_env(target: usize) -> Environment {
        Environment::new(
            System::Single,
            QuantumState::basis(2, target).unwrap(),
            &AgentConfig::default_zero(),
        )
        .unwrap()
    }

    #[test]
    fn reward_examples() {
        assert_eq!(reward_single(0.5).unwrap(), 12.5);
        assert_eq!(reward_single(0.0).unwrap(), 0.0);
        assert_eq!(reward_single(0.99).unwrap(), 5000.0);
        assert_eq!(reward_two(0.5).unwrap(), 500.0);
        assert_eq!(reward_two(0.99).unwrap(), 5000.0);
        assert_eq!(reward_two(0.0).unwrap(), 0.0);
        assert!(reward_single(1.01).is_err());
        assert!(reward_two(-0.1).is_err());
    }

    #[test]
    fn reward_is_monotone_with_jump() {
        let mut last = 0.0;
        for k in 0..=1000 {
            let f = k as f64 / 1000.0;
            let r = reward_single(f).unwrap();
            assert!(r >= last);
            last = r;
        }
        assert!(reward_single(0.989_999).unwrap() < 100.0);
    }

    #[test]
    fn action_indexing() {
        let set = ActionSet {
            system: System::Two,
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0],
        };
        assert_eq!(set.len(), 25);
        for j1 in 1..=5usize {
            for j2 in 1..=5usize {
                let idx = 5 * (j1 - 1) + (j2 - 1);
                assert_eq!(set.pulse(idx).unwrap(), vec![j1 as f64, j2 as f64]);
            }
        }
        assert!(set.pulse(25).is_err());
    }

    #[test]
    fn step_from_target_with_free_precession() {
        let env = single_env(1);
        let s = QuantumState::basis(2, 1).unwrap();
        let out = env.step(&s, 0, None).unwrap();
        let expected = 1.0 - (PI / 40.0).sin().powi(2);
        assert!((out.fidelity - expected).abs() < 1e-14);
        assert!((out.fidelity - 0.99386).abs() < 5e-5);
        assert!(out.terminal);
        assert_eq!(out.reward, 5000.0);
    }

    #[test]
    fn invalid_actions_are_rejected() {
        let env = single_env(0);
        let s = QuantumState::basis(2, 0).unwrap();
        assert!(matches!(env.step(&s, 4, None), Err(Error::InvalidAction { .. })));
        assert!(env.step(&QuantumState::bell(), 0, None).is_err());
    }

    #[test]
    fn silent_noise_is_bit_exact() {
        let env = single_env(0);
        let s = crate::tasks::BlochPoint::new(1.0, 2.0).unwrap().to_state().unwrap();
        for kind in [NoiseKind::Static, NoiseKind::Dynamic] {
            for channel in [NoiseChannel::J, NoiseChannel::H] {
                let spec = NoiseSpec {
                    channel,
                    kind,
                    amplitude: 0.0,
                    seed: 3,
                };
                let mut process = NoiseProcess::new(spec, true);
                for a in 0..4 {
                    let clean = env.step(&s, a, None).unwrap();
                    let noisy = env.step(&s, a, Some(&mut process)).unwrap();
                    assert_eq!(clean, noisy);
                }
            }
        }
    }

    #[test]
    fn two_qubit_alphabet_rejects_zero_exchange() {
        let mut cfg = AgentConfig::default_bell();
        cfg.allowed_actions = vec![0.0, 1.0];
        assert!(Environment::new(System::Two, QuantumState::bell(), &cfg).is_err());
    }
}
