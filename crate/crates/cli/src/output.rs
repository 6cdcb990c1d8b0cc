// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use usp_core::config::{derive_seed, RunConfig};
use usp_core::trainer::EvaluationReport;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Records as JSON lines, then histogram and summaries.
pub fn write_report(dir: &Path, report: &EvaluationReport) -> Result<Vec<PathBuf>> {
    let records = dir.join("records.jsonl");
    let mut w = create(&records)?;
    for r in &report.records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;
    let histogram = dir.join("histogram.csv");
    report.histogram.write_csv(create(&histogram)?)?;
    let text = dir.join("summary.txt");
    write_text(&text, &report.summary.to_text())?;
    let json = dir.join("summary.json");
    write_json(&json, &report.summary)?;
    Ok(vec![records, histogram, text, json])
}

#[derive(Serialize)]
struct Seeds {
    master: u64,
    init: u64,
    train: u64,
    split: u64,
    subsample: u64,
    grape: u64,
    noise: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: String,
    config: &'a RunConfig,
    seeds: Seeds,
    checkpoint_sha256: Option<String>,
    outputs: Vec<String>,
}

/// `manifest-<command>.json`: enough to rerun the command.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    outputs: &[PathBuf],
) -> Result<()> {
    let checkpoint_sha256 = match checkpoint {
        Some(p) => Some(sha256_hex(&fs::read(p).with_context(|| format!("cannot read {}", p.display()))?)),
        None => None,
    };
    let m = cfg.seed;
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(cfg.to_toml_string().as_bytes()),
        config: cfg,
        seeds: Seeds {
            master: m,
            init: derive_seed(m, "init"),
            train: derive_seed(m, "train"),
            split: derive_seed(m, "split"),
            subsample: derive_seed(m, "subsample"),
            grape: derive_seed(m, "grape"),
            noise: derive_seed(m, "noise"),
        },
        checkpoint_sha256,
        outputs: outputs
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
    };
    write_json(&dir.join(format!("manifest-{command}.json")), &manifest)
}
