#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use slcogarch::exec::{path_rng, replication_rng};
use slcogarch::{CogarchParams, JumpDist, SemiLevyConfig};

pub const TAU: f64 = 6.5;
pub const SAMPLE_INTERVAL: f64 = 0.25;

fn driver(dists: [(f64, f64); 4]) -> SemiLevyConfig {
    SemiLevyConfig::new(
        TAU,
        vec![0.5, 2.5, 3.0, 0.5],
        vec![4.0, 10.0, 5.0, 30.0],
        dists
            .iter()
            .map(|&(m, v)| JumpDist::normal(m, v).unwrap())
            .collect(),
        0.0,
    )
    .unwrap()
}

/// Positive-mean jumps, 30 periods of 26 samples.
pub fn example_driver() -> SemiLevyConfig {
    driver([(2.0, 4.0), (1.5, 2.5), (2.5, 1.5), (1.75, 3.0)])
}

pub fn example_params() -> CogarchParams {
    CogarchParams::new(
        1e-6,
        &[0.005],
        &[2.1, 6.0, 0.6],
        &[0.37e-3, 0.05e-3, 0.19e-3],
    )
    .unwrap()
}

/// Centred jumps with the heavier volatility feedback.
pub fn zero_mean_driver() -> SemiLevyConfig {
    driver([(0.0, 4.0), (0.0, 2.5), (0.0, 1.5), (0.0, 3.0)])
}

pub fn zero_mean_params() -> CogarchParams {
    CogarchParams::new(
        0.8e-6,
        &[0.0275],
        &[2.1, 6.0, 0.6],
        &[0.37e-3, 0.05e-3, 0.19e-3],
    )
    .unwrap()
}

pub fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = path_rng(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `(2 + cos(2πk/ϱ)) ε_k`: periodically correlated with period `ϱ`.
pub fn am_noise(n: usize, period: usize, seed: u64) -> Vec<f64> {
    let mut rng = replication_rng(seed, period as u64);
    (0..n)
        .map(|k| {
            let e: f64 = rng.sample(StandardNormal);
            (2.0 + (2.0 * std::f64::consts::PI * k as f64 / period as f64).cos()) * e
        })
        .collect()
}

pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Standard error of the sample variance, from the fourth central moment.
pub fn var_se(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (m, v) = mean_var(x);
    let m4 = x.iter().map(|y| (y - m).powi(4)).sum::<f64>() / n;
    ((m4 - v * v) / n).max(0.0).sqrt()
}
