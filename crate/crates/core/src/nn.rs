// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! Fully connected ReLU network with a linear head, trained by plain
//! mini-batch gradient descent on a masked mean-squared error.
//!
//! Batches are stored column-wise: an `n_in x batch` matrix feeds an
//! `n_out x batch` output.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "usp-network";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Layer widths `(input, hidden.., output)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub sizes: Vec<usize>,
}

impl LayerSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 3 {
            return Err(Error::Config(format!(
                "network needs input, output and at least one hidden layer, got widths {sizes:?}"
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::Config(format!("layer widths must be >= 1, got {sizes:?}")));
        }
        Ok(Self { sizes })
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out x in`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            weights: DMatrix::zeros(n_out, n_in),
            bias: DVector::zeros(n_out),
        }
    }
}

/// Network parameters. Main and target networks share this type.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: LayerSpec,
    layers: Vec<Dense>,
}

/// Same shape as the network it was taken from.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Dense>,
}

impl Gradient {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// One regression sample: only output `action` is fitted to `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub action: usize,
    pub target: f64,
}

struct Activations {
    /// Layer inputs; `inputs[0]` is the batch itself.
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<DMatrix<f64>>,
}

fn relu_in_place(m: &mut DMatrix<f64>) {
    m.iter_mut().for_each(|x| *x = x.max(0.0));
}

impl Network {
    /// Zero-mean normal weights with variance `2 / fan_in`; zero biases.
    pub fn init_random(spec: &LayerSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / n_in as f64).sqrt()).expect("finite std");
                let mut layer = Dense::zeros(n_in, n_out);
                for r in 0..n_out {
                    for c in 0..n_in {
                        layer.weights[(r, c)] = normal.sample(&mut rng);
                    }
                }
                layer
            })
            .collect();
        Self {
            spec: spec.clone(),
            layers,
        }
    }

    pub fn zeros(spec: &LayerSpec) -> Self {
        Self {
            spec: spec.clone(),
            layers: spec.sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, rows: usize) -> Result<()> {
        if rows != self.spec.input_width() {
            return Err(Error::ShapeMismatch(format!(
                "network expects {} inputs, got {rows}",
                self.spec.input_width()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let mut x = DVector::from_column_slice(input);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * &x + &layer.bias;
            if k != last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            x = z;
        }
        Ok(x.as_slice().to_vec())
    }

    /// Output columns for every input column.
    pub fn forward_batch(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(inputs.nrows())?;
        let mut acts = self.forward_with_cache(inputs);
        Ok(acts.pre.pop().expect("at least one layer"))
    }

    fn forward_with_cache(&self, inputs: &DMatrix<f64>) -> Activations {
        let mut cache = Activations {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut x = inputs.clone();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * &x;
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }
            if k != last {
                let mut a = z.clone();
                relu_in_place(&mut a);
                cache.inputs.push(x);
                cache.pre.push(z);
                x = a;
            } else {
                cache.inputs.push(x);
                cache.pre.push(z);
                break;
            }
        }
        cache
    }

    /// Exact gradient of the masked mean-squared error over a batch given
    /// column-wise, together with the loss itself.
    pub fn backward_batch(
        &self,
        inputs: &DMatrix<f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(Gradient, f64)> {
        let n = inputs.ncols();
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        self.check_input(inputs.nrows())?;
        if actions.len() != n || targets.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "batch of {n} inputs with {} actions and {} targets",
                actions.len(),
                targets.len()
            )));
        }
        let n_out = self.spec.output_width();
        if let Some(&a) = actions.iter().find(|&&a| a >= n_out) {
            return Err(Error::InvalidAction { index: a, count: n_out });
        }

        let cache = self.forward_with_cache(inputs);
        let out = cache.pre.last().expect("at least one layer");
        let pred: Vec<f64> = actions.iter().enumerate().map(|(i, &a)| out[(a, i)]).collect();
        let loss = mse_loss(&pred, targets)?;

        let mut delta = DMatrix::zeros(n_out, n);
        let scale = 2.0 / n as f64;
        for (i, (&a, (&p, &t))) in actions.iter().zip(pred.iter().zip(targets)).enumerate() {
            delta[(a, i)] = scale * (p - t);
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let input = &cache.inputs[k];
            let d_weights = &delta * input.transpose();
            let d_bias = delta.column_sum();
            if k > 0 {
                let mut back = self.layers[k].weights.transpose() * &delta;
                back.zip_apply(&cache.pre[k - 1], |b, z| {
                    if z <= 0.0 {
                        *b = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Dense {
                weights: d_weights,
                bias: d_bias,
            });
        }
        grads.reverse();
        Ok((Gradient { layers: grads }, loss))
    }

    pub fn backward(&self, batch: &[Sample]) -> Result<(Gradient, f64)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let width = self.spec.input_width();
        if let Some(s) = batch.iter().find(|s| s.input.len() != width) {
            return Err(Error::ShapeMismatch(format!(
                "network expects {width} inputs, got {}",
                s.input.len()
            )));
        }
        let inputs = DMatrix::from_fn(width, batch.len(), |r, c| batch[c].input[r]);
        let actions: Vec<usize> = batch.iter().map(|s| s.action).collect();
        let targets: Vec<f64> = batch.iter().map(|s| s.target).collect();
        self.backward_batch(&inputs, &actions, &targets)
    }

    /// `params <- params - alpha * gradient`.
    pub fn sgd_update(&mut self, grad: &Gradient, alpha: f64) -> Result<()> {
        if grad.layers.len() != self.layers.len()
            || grad.layers.iter().zip(&self.layers).any(|(g, l)| {
                g.weights.shape() != l.weights.shape() || g.bias.len() != l.bias.len()
            })
        {
            return Err(Error::ShapeMismatch("gradient does not match network".into()));
        }
        for (layer, g) in self.layers.iter_mut().zip(&grad.layers) {
            layer.weights.zip_apply(&g.weights, |w, d| *w -= alpha * d);
            layer.bias.axpy(-alpha, &g.bias, 1.0);
        }
        Ok(())
    }

    /// Deep copy, as used for the target network.
    pub fn copy_params(&self) -> Self {
        self.clone()
    }

    pub fn to_checkpoint(&self, seed: u64, tags: BTreeMap<String, String>) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            spec: self.spec.clone(),
            seed,
            tags,
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    rows: l.weights.nrows(),
                    cols: l.weights.ncols(),
                    weights: l.weights.transpose().as_slice().to_vec(),
                    bias: l.bias.as_slice().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        let spec = LayerSpec::new(ckpt.spec.sizes.clone())?;
        if ckpt.layers.len() + 1 != spec.sizes.len() {
            return Err(Error::ShapeMismatch("checkpoint layer count".into()));
        }
        let layers = spec
            .sizes
            .windows(2)
            .zip(&ckpt.layers)
            .map(|(w, rec)| {
                if rec.rows != w[1]
                    || rec.cols != w[0]
                    || rec.weights.len() != w[0] * w[1]
                    || rec.bias.len() != w[1]
                {
                    return Err(Error::ShapeMismatch(format!(
                        "checkpoint layer {}x{} does not match widths {:?}",
                        rec.rows, rec.cols, w
                    )));
                }
                Ok(Dense {
                    weights: DMatrix::from_row_slice(rec.rows, rec.cols, &rec.weights),
                    bias: DVector::from_column_slice(&rec.bias),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { spec, layers })
    }
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(sum / pred.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Versioned on-disk form of a [`Network`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub spec: LayerSpec,
    pub seed: u64,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
    pub layers: Vec<LayerRecord>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
