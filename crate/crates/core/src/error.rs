// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported state dimension {0} (only 2 and 4 are modelled)")]
    UnsupportedDimension(usize),

    #[error("state is not normalized: norm = {0}")]
    NotNormalized(f64),

    #[error("matrix is not Hermitian: max |H - H^dagger| = {0:e}")]
    NotHermitian(f64),

    #[error("action index {index} out of range for an alphabet of {count} actions")]
    InvalidAction { index: usize, count: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
