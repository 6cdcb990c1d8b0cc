// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs driven by a [`RunConfig`]: training, greedy evaluation,
//! noise sweeps and the GRAPE baseline. The command-line tool is a thin
//! layer over these.

use std::collections::BTreeMap;

use crate::config::{derive_seed, RunConfig};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::grape::grape_baseline;
use crate::nn::{Checkpoint, Network};
use crate::noise::{evaluate_under_noise, DesignedTask, NoiseChannel, NoiseKind, SweepRow};
use crate::quantum::QuantumState;
use crate::tasks::{point_to_state, TaskPoint, TaskSet};
use crate::trainer::{evaluate_set, train_usp, EvaluationReport, TrainingReport};

pub fn environment(cfg: &RunConfig) -> Result<Environment> {
    cfg.validate()?;
    Environment::new(cfg.system, cfg.target_state()?, &cfg.agent)
}

pub fn task_states(set: &TaskSet) -> Result<Vec<(Option<TaskPoint>, QuantumState)>> {
    set.points.iter().map(|p| Ok((Some(*p), point_to_state(p)?))).collect()
}

/// Trains on the configured training set with the master seed.
pub fn train(cfg: &RunConfig) -> Result<(Network, TrainingReport)> {
    let env = environment(cfg)?;
    let (train, _) = cfg.task_sets()?;
    train_usp(&cfg.agent, &env, &train.states()?, cfg.seed)
}

/// Greedy designs for every point of the configured test set.
pub fn evaluate(cfg: &RunConfig, net: &Network) -> Result<EvaluationReport> {
    let env = environment(cfg)?;
    let (_, test) = cfg.task_sets()?;
    evaluate_set(net, &env, &task_states(&test)?, &cfg.agent, cfg.evaluation.histogram_bins)
}

pub fn designed_tasks(report: &EvaluationReport, tasks: &[(Option<TaskPoint>, QuantumState)]) -> Vec<DesignedTask> {
    report
        .records
        .iter()
        .zip(tasks)
        .map(|(r, (_, initial))| DesignedTask {
            initial: initial.clone(),
            actions: r.actions.clone(),
            clean_max_fidelity: r.max_fidelity,
        })
        .collect()
}

/// One sweep per (channel, kind) over the configured amplitude grids.
pub fn noise_sweeps(cfg: &RunConfig, net: &Network) -> Result<Vec<(NoiseChannel, NoiseKind, Vec<SweepRow>)>> {
    cfg.noise.validate()?;
    let env = environment(cfg)?;
    let (_, test) = cfg.task_sets()?;
    let tasks = task_states(&test)?;
    let report = evaluate_set(net, &env, &tasks, &cfg.agent, cfg.evaluation.histogram_bins)?;
    let designed = designed_tasks(&report, &tasks);
    let seed = derive_seed(cfg.seed, "noise");
    let mut out = Vec::new();
    for kind in [NoiseKind::Static, NoiseKind::Dynamic] {
        let grid = match kind {
            NoiseKind::Static => &cfg.noise.static_amplitudes,
            NoiseKind::Dynamic => &cfg.noise.dynamic_amplitudes,
        };
        for channel in [NoiseChannel::J, NoiseChannel::H] {
            let rows = evaluate_under_noise(
                &env,
                &designed,
                channel,
                kind,
                grid,
                cfg.noise.realizations,
                seed,
                cfg.noise.recompute_j12,
            )?;
            out.push((channel, kind, rows));
        }
    }
    Ok(out)
}

/// GRAPE over the configured test set.
pub fn baseline(cfg: &RunConfig) -> Result<EvaluationReport> {
    let env = environment(cfg)?;
    let (_, test) = cfg.task_sets()?;
    grape_baseline(
        &env,
        &task_states(&test)?,
        &cfg.grape,
        derive_seed(cfg.seed, "grape"),
        cfg.evaluation.histogram_bins,
    )
}

/// Tags stored with a checkpoint so it is not reused for another task.
pub fn checkpoint_tags(cfg: &RunConfig) -> BTreeMap<String, String> {
    let mut tags = BTreeMap::new();
    tags.insert("system".to_string(), cfg.system.label().to_string());
    tags.insert("target".to_string(), cfg.target.label().to_string());
    tags
}

pub fn load_network(ckpt: &Checkpoint, cfg: &RunConfig) -> Result<Network> {
    for (key, want) in checkpoint_tags(cfg) {
        match ckpt.tags.get(&key) {
            Some(have) if *have == want => {}
            Some(have) => {
                return Err(Error::Config(format!(
                    "checkpoint was trained for {key} = {have}, configuration asks for {want}"
                )))
            }
            None => return Err(Error::Config(format!("checkpoint has no {key} tag"))),
        }
    }
    let net = Network::from_checkpoint(ckpt)?;
    let expected = cfg.agent.layer_sizes(cfg.system);
    if net.spec().sizes != expected {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint layers {:?} do not match configured {:?}",
            net.spec().sizes,
            expected
        )));
    }
    Ok(net)
}
