// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use usp_core::nn::{mse_loss, LayerSpec, Network, Sample};

fn random_batch(rng: &mut ChaCha8Rng, width: usize, outputs: usize, n: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| Sample {
            input: (0..width).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: rng.random_range(0..outputs),
            target: rng.random_range(-5.0..5.0),
        })
        .collect()
}

fn loss(net: &Network, batch: &[Sample]) -> f64 {
    let pred: Vec<f64> = batch.iter().map(|s| net.forward(&s.input).unwrap()[s.action]).collect();
    let target: Vec<f64> = batch.iter().map(|s| s.target).collect();
    mse_loss(&pred, &target).unwrap()
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let depth = rng.random_range(1..=3);
        let mut sizes = vec![rng.random_range(1..=8)];
        for _ in 0..depth {
            sizes.push(rng.random_range(1..=20));
        }
        sizes.push(rng.random_range(1..=6));
        let spec = LayerSpec::new(sizes.clone()).unwrap();
        let mut net = Network::init_random(&spec, case);
        for layer in net.layers_mut() {
            layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let n = rng.random_range(1..=8);
        let batch = random_batch(&mut rng, sizes[0], *sizes.last().unwrap(), n);
        let (grad, _) = net.backward(&batch).unwrap();

        let h = 1e-5;
        for l in 0..net.layers().len() {
            let (rows, cols) = net.layers()[l].weights.shape();
            let coords: Vec<Option<(usize, usize)>> = (0..rows)
                .flat_map(|r| (0..cols).map(move |c| Some((r, c))))
                .chain((0..rows).map(|_| None))
                .collect();
            for (k, coord) in coords.into_iter().enumerate() {
                let probe = |delta: f64| {
                    let mut moved = net.clone();
                    let layer = &mut moved.layers_mut()[l];
                    match coord {
                        Some(rc) => layer.weights[rc] += delta,
                        None => layer.bias[k - rows * cols] += delta,
                    }
                    loss(&moved, &batch)
                };
                let numeric = (probe(h) - probe(-h)) / (2.0 * h);
                let analytic = match coord {
                    Some(rc) => grad.layers[l].weights[rc],
                    None => grad.layers[l].bias[k - rows * cols],
                };
                let scale = analytic.abs().max(numeric.abs()).max(1e-4);
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst}");
}

#[test]
fn repeated_updates_on_a_fixed_batch_reduce_the_loss() {
    let spec = LayerSpec::new(vec![4, 20, 20, 4]).unwrap();
    let mut net = Network::init_random(&spec, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch = random_batch(&mut rng, 4, 4, 32);
    let mut previous = loss(&net, &batch);
    let start = previous;
    for _ in 0..100 {
        let (grad, _) = net.backward(&batch).unwrap();
        net.sgd_update(&grad, 1e-3).unwrap();
        let now = loss(&net, &batch);
        assert!(now <= previous + 1e-12, "loss rose from {previous} to {now}");
        previous = now;
    }
    assert!(previous < start);
}

#[test]
fn identical_seeds_give_identical_parameter_trajectories() {
    let run = || {
        let spec = LayerSpec::new(vec![4, 20, 20, 4]).unwrap();
        let mut net = Network::init_random(&spec, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let batch = random_batch(&mut rng, 4, 4, 8);
            let (grad, _) = net.backward(&batch).unwrap();
            net.sgd_update(&grad, 1e-2).unwrap();
        }
        net
    };
    assert_eq!(run(), run());
}

#[test]
fn init_variance_follows_fan_in() {
    let spec = LayerSpec::new(vec![20, 20, 1]).unwrap();
    let mut total = 0.0;
    let mut count = 0usize;
    for seed in 0..200 {
        let net = Network::init_random(&spec, seed);
        let w: &DMatrix<f64> = &net.layers()[0].weights;
        total += w.iter().map(|x| x * x).sum::<f64>();
        count += w.len();
    }
    let variance = total / count as f64;
    assert!((variance - 0.1).abs() < 0.05 * 0.1, "variance {variance}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_ignores_batch_order(seed in any::<u64>(), n in 2usize..12, rot in 0usize..12) {
        let spec = LayerSpec::new(vec![4, 7, 3]).unwrap();
        let net = Network::init_random(&spec, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
        let batch = random_batch(&mut rng, 4, 3, n);
        let mut shuffled = batch.clone();
        shuffled.rotate_left(rot % n);
        shuffled.reverse();
        let (ga, la) = net.backward(&batch).unwrap();
        let (gb, lb) = net.backward(&shuffled).unwrap();
        prop_assert!((la - lb).abs() <= 1e-12 * la.max(1.0));
        for (x, y) in ga.layers.iter().zip(&gb.layers) {
            prop_assert!((&x.weights - &y.weights).amax() <= 1e-12 * (1.0 + x.weights.amax()));
            prop_assert!((&x.bias - &y.bias).amax() <= 1e-12 * (1.0 + x.bias.amax()));
        }
    }
}
