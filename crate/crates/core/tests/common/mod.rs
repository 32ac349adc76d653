//! Shared helpers for the integration suites.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sbs_core::Dataset;

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Independent Gaussian columns plus a planted linear signal and unit noise.
/// `beta` is a list of (column, coefficient) pairs.
pub fn gaussian_instance(
    n: usize,
    p: usize,
    beta: &[(usize, f64)],
    noise: f64,
    seed: u64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| standard_normal(&mut rng)).collect())
        .collect();
    let mut y = vec![0.0; n];
    for &(j, b) in beta {
        for i in 0..n {
            y[i] += b * cols[j][i];
        }
    }
    for yi in y.iter_mut() {
        *yi += noise * standard_normal(&mut rng);
    }
    Dataset::from_columns(y, cols).expect("finite data")
}

/// |a - b| relative to max(1, |a|, |b|).
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
