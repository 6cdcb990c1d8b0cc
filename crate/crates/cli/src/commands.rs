// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use usp_core::config::RunConfig;
use usp_core::nn::{Checkpoint, Network};
use usp_core::noise::write_sweep_csv;
use usp_core::pipeline;
use usp_core::tasks::{BlochPoint, TaskPoint, TaskSetManifest};
use usp_core::trainer::{bloch_trail, design_trajectory, TrajectoryRecord};

use crate::output::{create, write_json, write_manifest, write_report, write_text};
use crate::{Common, DesignArgs};

/// Configuration file (or defaults) with command-line overrides applied.
fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::defaults(c.system(), c.target()),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = c.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build_global()
        .context("starting the worker pool")?;
    Ok(cfg)
}

fn out_dir(c: &Common) -> Result<&Path> {
    fs::create_dir_all(&c.out).with_context(|| format!("cannot create {}", c.out.display()))?;
    Ok(&c.out)
}

fn checkpoint_path(c: &Common) -> Result<&Path> {
    c.checkpoint.as_deref().context("--checkpoint is required for this command")
}

fn load_checkpoint(c: &Common, cfg: &RunConfig) -> Result<Network> {
    let path = checkpoint_path(c)?;
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(pipeline::load_network(&ckpt, cfg)?)
}

pub fn train(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let dir = out_dir(c)?;
    let (train, test) = cfg.task_sets()?;
    let (net, report) = pipeline::train(&cfg)?;

    let ckpt = dir.join("checkpoint.json");
    net.to_checkpoint(cfg.seed, pipeline::checkpoint_tags(&cfg)).save(&ckpt)?;
    let report_path = dir.join("training_report.json");
    write_json(&report_path, &report)?;
    let train_path = dir.join("train_points.txt");
    write_text(&train_path, &train.to_lines())?;
    let test_path = dir.join("test_points.txt");
    write_text(&test_path, &test.to_lines())?;
    let tasks_path = dir.join("tasks_manifest.json");
    write_json(
        &tasks_path,
        &TaskSetManifest {
            seed: Some(cfg.seed),
            train_count: train.len(),
            test_count: test.len(),
        },
    )?;
    let outputs = [ckpt.clone(), report_path, train_path, test_path, tasks_path];
    write_manifest(dir, "train", &cfg, Some(&ckpt), &outputs)?;
    println!(
        "trained on {} points, {} steps; checkpoint {}",
        report.points.len(),
        report.total_steps,
        ckpt.display()
    );
    Ok(())
}

pub fn evaluate(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let net = load_checkpoint(c, &cfg)?;
    let dir = out_dir(c)?;
    let report = pipeline::evaluate(&cfg, &net)?;
    let outputs = write_report(dir, &report)?;
    write_manifest(dir, "evaluate", &cfg, Some(checkpoint_path(c)?), &outputs)?;
    print!("{}", report.summary.to_text());
    Ok(())
}

pub fn baseline(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let dir = out_dir(c)?;
    let report = pipeline::baseline(&cfg)?;
    let outputs = write_report(dir, &report)?;
    write_manifest(dir, "baseline", &cfg, None, &outputs)?;
    print!("{}", report.summary.to_text());
    Ok(())
}

pub fn noise_sweep(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let net = load_checkpoint(c, &cfg)?;
    let dir = out_dir(c)?;
    let mut outputs = Vec::new();
    for (channel, kind, rows) in pipeline::noise_sweeps(&cfg, &net)? {
        let path = dir.join(format!("sweep_{channel}_{kind}.csv"));
        write_sweep_csv(&rows, create(&path)?)?;
        for r in &rows {
            println!("{kind} {channel} amplitude {:.3}: {:.6}", r.amplitude, r.average_fidelity);
        }
        outputs.push(path);
    }
    write_manifest(dir, "noise-sweep", &cfg, Some(checkpoint_path(c)?), &outputs)?;
    Ok(())
}

pub fn design(d: &DesignArgs) -> Result<()> {
    let c = &d.common;
    let cfg = load_config(c)?;
    let net = load_checkpoint(c, &cfg)?;
    let point = design_point(d)?;
    let env = pipeline::environment(&cfg)?;
    let initial = point.to_state()?;
    if initial.dim() != cfg.system.dim() {
        bail!("task has dimension {} but the configured system needs {}", initial.dim(), cfg.system.dim());
    }
    let want_trail = d.trail || cfg.system == usp_core::config::System::Single;
    let dir = out_dir(c)?;
    let design = design_trajectory(&net, &env, &initial, &cfg.agent)?;
    let trail = if want_trail {
        Some(bloch_trail(&env, &initial, &design.trajectory.actions)?)
    } else {
        None
    };
    let record = TrajectoryRecord::from_design(0, Some(point), design);
    let mut outputs: Vec<PathBuf> = Vec::new();
    let traj_path = dir.join("trajectory.json");
    write_json(&traj_path, &record)?;
    outputs.push(traj_path);
    if let Some(trail) = trail {
        let path = dir.join("bloch_trail.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["step", "x", "y", "z"])?;
        for (k, [x, y, z]) in trail.iter().enumerate() {
            w.write_record([k.to_string(), format!("{x:?}"), format!("{y:?}"), format!("{z:?}")])?;
        }
        w.flush()?;
        outputs.push(path);
    }
    write_manifest(dir, "design", &cfg, Some(checkpoint_path(c)?), &outputs)?;
    println!(
        "{} pulses, max fidelity {:.6} at step {}",
        record.steps, record.max_fidelity, record.max_fidelity_step
    );
    Ok(())
}

fn design_point(d: &DesignArgs) -> Result<TaskPoint> {
    match (&d.point, &d.theta, &d.phi) {
        (Some(line), None, None) => Ok(line.parse()?),
        (None, Some(theta), Some(phi)) => Ok(TaskPoint::Bloch(BlochPoint::new(parse_angle(theta)?, parse_angle(phi)?)?)),
        _ => bail!("give either --theta and --phi, or --point"),
    }
}

/// Accepts plain numbers and multiples of pi such as `pi`, `-pi/2`,
/// `5pi/6` or `3*pi/4`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let Some(at) = t.find("pi") else {
        return t.parse().with_context(|| format!("not an angle: {text}"));
    };
    let coeff = match t[..at].trim_end_matches('*') {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().with_context(|| format!("not an angle: {text}"))?,
    };
    let rest = &t[at + 2..];
    let denom = match rest.strip_prefix('/') {
        Some(d) => d.parse::<f64>().with_context(|| format!("not an angle: {text}"))?,
        None if rest.is_empty() => 1.0,
        None => bail!("not an angle: {text}"),
    };
    Ok(coeff * PI / denom)
}
