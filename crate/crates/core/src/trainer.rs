// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! Universal state preparation: one network trained over many initial
//! states, then used greedily to design a pulse sequence for any new one.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, AgentConfig, System};
use crate::dqn::{argmax, encode_state, maybe_sync_target, select_action, train_step, EpsilonSchedule, Experience, ReplayMemory};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Network};
use crate::quantum::{state_to_bloch, QuantumState};
use crate::tasks::TaskPoint;

/// How design times are measured; copied into every summary.
pub const TIMING_NOTE: &str =
    "wall-clock of the greedy rollout only (network forwards and propagator applications), excluding checkpoint load";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlTrajectory {
    pub actions: Vec<usize>,
    /// `[J]` or `[J1, J2]` per slice.
    pub pulses: Vec<Vec<f64>>,
    /// Fidelity with the target after each slice.
    pub fidelity_per_step: Vec<f64>,
    pub initial_fidelity: f64,
    pub final_fidelity: f64,
    /// Best fidelity seen, counting the initial state as step 0.
    pub max_fidelity: f64,
    pub max_fidelity_step: usize,
    pub steps: usize,
}

impl ControlTrajectory {
    fn start(initial_fidelity: f64) -> Self {
        Self {
            actions: Vec::new(),
            pulses: Vec::new(),
            fidelity_per_step: Vec::new(),
            initial_fidelity,
            final_fidelity: initial_fidelity,
            max_fidelity: initial_fidelity,
            max_fidelity_step: 0,
            steps: 0,
        }
    }

    fn record(&mut self, action: usize, pulse: Vec<f64>, fidelity: f64) {
        self.actions.push(action);
        self.pulses.push(pulse);
        self.fidelity_per_step.push(fidelity);
        self.steps += 1;
        self.final_fidelity = fidelity;
        if fidelity > self.max_fidelity {
            self.max_fidelity = fidelity;
            self.max_fidelity_step = self.steps;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub trajectory: ControlTrajectory,
    pub rewards: Vec<f64>,
    /// `sum_t gamma^(t-1) r_t`.
    pub total_discounted_reward: f64,
    pub success: bool,
}

pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    for r in rewards {
        total += weight * r;
        weight *= gamma;
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Greedy,
}

/// Main and target networks with their replay memory and schedule.
#[derive(Clone, Debug)]
pub struct Agent {
    pub main: Network,
    pub target: Network,
    pub memory: ReplayMemory,
    pub epsilon: EpsilonSchedule,
    /// Environment steps taken in training, across all episodes and points.
    pub global_step: u64,
    pub losses: Vec<(u64, f64)>,
    loss_every: u64,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(cfg: &AgentConfig, spec: &LayerSpec, seed: u64) -> Self {
        let main = Network::init_random(spec, derive_seed(seed, "init"));
        Self::from_network(cfg, main, seed)
    }

    pub fn from_network(cfg: &AgentConfig, main: Network, seed: u64) -> Self {
        Self {
            target: main.copy_params(),
            main,
            memory: ReplayMemory::new(cfg.memory_size),
            epsilon: EpsilonSchedule::training(cfg.epsilon_increment, cfg.epsilon_max),
            global_step: 0,
            losses: Vec::new(),
            loss_every: 100,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "train")),
        }
    }

    pub fn reset_epsilon(&mut self, cfg: &AgentConfig) {
        self.epsilon = EpsilonSchedule::training(cfg.epsilon_increment, cfg.epsilon_max);
    }
}

/// One episode from `initial`. In training mode every step is stored,
/// followed by one update of the main network and a possible target sync.
pub fn run_episode(
    agent: &mut Agent,
    env: &Environment,
    initial: &QuantumState,
    cfg: &AgentConfig,
    mode: Mode,
) -> Result<EpisodeResult> {
    let mut state = initial.clone();
    let mut traj = ControlTrajectory::start(env.fidelity(initial)?);
    let mut rewards = Vec::new();
    let mut greedy = EpsilonSchedule::testing();
    let mut success = false;

    while traj.steps < cfg.max_steps {
        let encoded = encode_state(&state);
        let q = agent.main.forward(&encoded)?;
        let action = match mode {
            Mode::Train => select_action(&q, &mut agent.epsilon, &mut agent.rng),
            Mode::Greedy => select_action(&q, &mut greedy, &mut agent.rng),
        };
        let out = env.step(&state, action, None)?;
        if mode == Mode::Train {
            let next_encoded = encode_state(&out.state);
            agent.memory.push(Experience {
                state: encoded,
                action,
                reward: out.reward,
                next_state: next_encoded,
                terminal: out.terminal,
            });
            let loss = train_step(&mut agent.main, &agent.target, &agent.memory, cfg, &mut agent.rng)?;
            agent.global_step += 1;
            if let Some(loss) = loss {
                if agent.global_step % agent.loss_every == 0 {
                    agent.losses.push((agent.global_step, loss));
                }
            }
            maybe_sync_target(agent.global_step, cfg.replace_period, &agent.main, &mut agent.target);
        }
        traj.record(action, env.actions().pulse(action)?, out.fidelity);
        rewards.push(out.reward);
        state = out.state;
        if out.terminal {
            success = true;
            break;
        }
    }
    Ok(EpisodeResult {
        total_discounted_reward: discounted_return(&rewards, cfg.discount_factor),
        rewards,
        trajectory: traj,
        success,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub index: usize,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_steps: f64,
    pub final_epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub points: Vec<PointReport>,
    /// `(global step, batch loss)` every 100 steps.
    pub loss_curve: Vec<(u64, f64)>,
    pub total_steps: u64,
    pub seed: u64,
}

/// Trains a fresh agent over `train_set` in order, `episodes_per_point`
/// episodes each. The exploitation probability restarts at 0 for every
/// point; memory and the step counter carry over.
pub fn train_usp(
    cfg: &AgentConfig,
    env: &Environment,
    train_set: &[QuantumState],
    seed: u64,
) -> Result<(Network, TrainingReport)> {
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let spec = LayerSpec::new(cfg.layer_sizes(env.system()))?;
    let mut agent = Agent::new(cfg, &spec, seed);
    let mut points = Vec::with_capacity(train_set.len());
    for (index, initial) in train_set.iter().enumerate() {
        agent.reset_epsilon(cfg);
        let (mut successes, mut steps) = (0usize, 0usize);
        for _ in 0..cfg.episodes_per_point {
            let ep = run_episode(&mut agent, env, initial, cfg, Mode::Train)?;
            successes += ep.success as usize;
            steps += ep.trajectory.steps;
        }
        let episodes = cfg.episodes_per_point;
        points.push(PointReport {
            index,
            episodes,
            successes,
            success_rate: if episodes == 0 { 0.0 } else { successes as f64 / episodes as f64 },
            mean_steps: if episodes == 0 { 0.0 } else { steps as f64 / episodes as f64 },
            final_epsilon: agent.epsilon.epsilon,
        });
    }
    let report = TrainingReport {
        points,
        loss_curve: std::mem::take(&mut agent.losses),
        total_steps: agent.global_step,
        seed,
    };
    Ok((agent.main, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub trajectory: ControlTrajectory,
    pub design_time_secs: f64,
}

/// Greedy rollout from `initial` until the threshold is met or the step
/// budget runs out. An initial state already at the threshold needs no
/// pulses.
pub fn design_trajectory(net: &Network, env: &Environment, initial: &QuantumState, cfg: &AgentConfig) -> Result<Design> {
    let started = Instant::now();
    let mut state = initial.clone();
    let mut traj = ControlTrajectory::start(env.fidelity(initial)?);
    if traj.initial_fidelity < env.threshold() {
        while traj.steps < cfg.max_steps {
            let q = net.forward(&encode_state(&state))?;
            let action = argmax(&q);
            let out = env.step(&state, action, None)?;
            traj.record(action, env.actions().pulse(action)?, out.fidelity);
            state = out.state;
            if out.terminal {
                break;
            }
        }
    }
    Ok(Design {
        trajectory: traj,
        design_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Bloch coordinates of the state after every pulse, starting with the
/// initial state. One qubit only.
pub fn bloch_trail(env: &Environment, initial: &QuantumState, actions: &[usize]) -> Result<Vec<[f64; 3]>> {
    if env.system() != System::Single {
        return Err(Error::Unsupported("a Bloch trail exists for single-qubit tasks only".into()));
    }
    let mut state = initial.clone();
    let mut trail = vec![state_to_bloch(&state)?];
    for &a in actions {
        state = env.step(&state, a, None)?.state;
        trail.push(state_to_bloch(&state)?);
    }
    Ok(trail)
}

/// Per-task output record shared by the learned policy and the GRAPE
/// baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub task_index: usize,
    pub point: Option<TaskPoint>,
    pub method: String,
    /// Headline figure: best fidelity within the step budget for the learned
    /// policy, final fidelity of the snapped sequence for GRAPE.
    pub fidelity: f64,
    pub actions: Vec<usize>,
    pub pulses: Vec<Vec<f64>>,
    pub fidelity_per_step: Vec<f64>,
    pub max_fidelity: f64,
    pub max_fidelity_step: usize,
    pub final_fidelity: f64,
    pub steps: usize,
    pub design_time_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub continuous_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
}

impl TrajectoryRecord {
    pub fn from_design(task_index: usize, point: Option<TaskPoint>, design: Design) -> Self {
        let t = design.trajectory;
        Self {
            task_index,
            point,
            method: "usp".into(),
            fidelity: t.max_fidelity,
            actions: t.actions,
            pulses: t.pulses,
            fidelity_per_step: t.fidelity_per_step,
            max_fidelity: t.max_fidelity,
            max_fidelity_step: t.max_fidelity_step,
            final_fidelity: t.final_fidelity,
            steps: t.steps,
            design_time_secs: design.design_time_secs,
            continuous_fidelity: None,
            iterations: None,
        }
    }

    /// The record with its timing zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            design_time_secs: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lower: f64,
    pub upper: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins over `[0, 1]`; 1.0 falls in the last bin.
    pub fn of_fidelities(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let mut counts = vec![0; bins];
        for &v in values {
            let k = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self {
            lower: 0.0,
            upper: 1.0,
            counts,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lower", "bin_upper", "count"])?;
        let width = (self.upper - self.lower) / self.counts.len() as f64;
        for (k, c) in self.counts.iter().enumerate() {
            let lo = self.lower + k as f64 * width;
            w.write_record([lo.to_string(), (lo + width).to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub tasks: usize,
    pub average_fidelity: f64,
    pub average_design_time_secs: f64,
    pub successes: usize,
    pub success_threshold: f64,
    /// Pre-snap GRAPE average; absent for the learned policy.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub average_continuous_fidelity: Option<f64>,
    pub timing: String,
}

impl Summary {
    pub fn of(method: &str, records: &[TrajectoryRecord], threshold: f64, timing: &str) -> Self {
        let n = records.len();
        let avg = |f: fn(&TrajectoryRecord) -> f64| {
            if n == 0 {
                0.0
            } else {
                records.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            method: method.into(),
            tasks: n,
            average_fidelity: avg(|r| r.fidelity),
            average_design_time_secs: avg(|r| r.design_time_secs),
            successes: records.iter().filter(|r| r.fidelity >= threshold).count(),
            success_threshold: threshold,
            average_continuous_fidelity: if n > 0 && records.iter().all(|r| r.continuous_fidelity.is_some()) {
                Some(records.iter().filter_map(|r| r.continuous_fidelity).sum::<f64>() / n as f64)
            } else {
                None
            },
            timing: timing.into(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut text = format!(
            "method: {}\ntasks: {}\naverage fidelity: {:.6}\n",
            self.method, self.tasks, self.average_fidelity
        );
        if let Some(c) = self.average_continuous_fidelity {
            text += &format!("average continuous fidelity: {c:.6}\n");
        }
        text += &format!(
            "average design time (s): {:.6e}\ntasks at F >= {}: {}\ntiming: {}\n",
            self.average_design_time_secs, self.success_threshold, self.successes, self.timing
        );
        text
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub records: Vec<TrajectoryRecord>,
    pub summary: Summary,
    pub histogram: Histogram,
}

/// Designs every task greedily. Tasks run in parallel on the current rayon
/// pool; records keep task order.
pub fn evaluate_set(
    net: &Network,
    env: &Environment,
    tasks: &[(Option<TaskPoint>, QuantumState)],
    cfg: &AgentConfig,
    bins: usize,
) -> Result<EvaluationReport> {
    let records: Vec<TrajectoryRecord> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, (point, initial))| {
            design_trajectory(net, env, initial, cfg).map(|d| TrajectoryRecord::from_design(i, *point, d))
        })
        .collect::<Result<_>>()?;
    let fids: Vec<f64> = records.iter().map(|r| r.fidelity).collect();
    Ok(EvaluationReport {
        summary: Summary::of("usp", &records, env.threshold(), TIMING_NOTE),
        histogram: Histogram::of_fidelities(&fids, bins),
        records,
    })
}
