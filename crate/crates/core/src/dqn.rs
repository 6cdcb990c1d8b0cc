// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! Deep-Q mechanics: state encoding, replay memory, the exploitation
//! schedule, temporal-difference targets and the per-step update.
//!
//! `epsilon` here is the probability of acting *greedily*. It starts at 0
//! (pure exploration), grows by a fixed increment after every decision up to
//! a cap, and is pinned to 1 for evaluation.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;

use crate::config::AgentConfig;
use crate::error::Result;
use crate::nn::Network;
use crate::quantum::QuantumState;

/// `(Re a0, Im a0, Re a1, Im a1, ...)`.
pub fn encode_state(s: &QuantumState) -> Vec<f64> {
    s.amplitudes().iter().flat_map(|a| [a.re, a.im]).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Bounded FIFO of transitions.
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    capacity: usize,
    buffer: VecDeque<Experience>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, exp: Experience) {
        if self.capacity == 0 {
            return;
        }
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(exp);
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.buffer.iter()
    }

    /// `n` distinct entries, uniformly. Returns `None` if fewer are stored.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<&Experience>> {
        if n > self.buffer.len() {
            return None;
        }
        Some(
            index::sample(rng, self.buffer.len(), n)
                .into_iter()
                .map(|i| &self.buffer[i])
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub epsilon: f64,
    pub increment: f64,
    pub max: f64,
}

impl EpsilonSchedule {
    /// Starts fully exploratory.
    pub fn training(increment: f64, max: f64) -> Self {
        Self {
            epsilon: 0.0,
            increment,
            max,
        }
    }

    /// Always greedy, never advances.
    pub fn testing() -> Self {
        Self {
            epsilon: 1.0,
            increment: 0.0,
            max: 1.0,
        }
    }

    pub fn advance(&mut self) {
        self.epsilon = (self.epsilon + self.increment).min(self.max);
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy with probability `epsilon`, uniformly random otherwise, then
/// advances the schedule.
pub fn select_action<R: Rng + ?Sized>(q_values: &[f64], sched: &mut EpsilonSchedule, rng: &mut R) -> usize {
    assert!(!q_values.is_empty(), "no actions to choose from");
    let greedy = sched.epsilon >= 1.0 || rng.random::<f64>() < sched.epsilon;
    let action = if greedy {
        argmax(q_values)
    } else {
        rng.random_range(0..q_values.len())
    };
    sched.advance();
    action
}

fn max_value(q: impl IntoIterator<Item = f64>) -> f64 {
    q.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// `r` for terminal transitions, `r + gamma * max_a' Q_target(s', a')`
/// otherwise.
pub fn td_target(exp: &Experience, target_net: &Network, gamma: f64) -> Result<f64> {
    if exp.terminal {
        return Ok(exp.reward);
    }
    let next_q = target_net.forward(&exp.next_state)?;
    Ok(exp.reward + gamma * max_value(next_q))
}

/// One gradient step of the main network on a uniformly drawn batch.
///
/// Does nothing and returns `None` while the memory holds fewer than
/// `batch_size` transitions.
pub fn train_step<R: Rng + ?Sized>(
    main: &mut Network,
    target: &Network,
    memory: &ReplayMemory,
    cfg: &AgentConfig,
    rng: &mut R,
) -> Result<Option<f64>> {
    let Some(batch) = memory.sample(cfg.batch_size, rng) else {
        return Ok(None);
    };
    let n = batch.len();
    let width = main.spec().input_width();
    let states = DMatrix::from_fn(width, n, |r, c| batch[c].state[r]);
    let next_states = DMatrix::from_fn(width, n, |r, c| batch[c].next_state[r]);
    let next_q = target.forward_batch(&next_states)?;
    let targets: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if e.terminal {
                e.reward
            } else {
                e.reward + cfg.discount_factor * max_value(next_q.column(i).iter().copied())
            }
        })
        .collect();
    let actions: Vec<usize> = batch.iter().map(|e| e.action).collect();
    let (grad, loss) = main.backward_batch(&states, &actions, &targets)?;
    main.sgd_update(&grad, cfg.learning_rate)?;
    Ok(Some(loss))
}

/// Copies the main network into the target network whenever `step` is a
/// multiple of `period`. Returns whether a copy happened.
pub fn maybe_sync_target(step: u64, period: u64, main: &Network, target: &mut Network) -> bool {
    if period == 0 || step % period != 0 {
        return false;
    }
    *target = main.copy_params();
    true
}
