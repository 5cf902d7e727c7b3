//! Small generated datasets for tests, examples and the regression path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{ColumnKind, NormRange, TabularDataset, Task};

fn names(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("x{k}")).collect()
}

fn build(name: &str, n: usize, features: Vec<f64>, target: Vec<f64>, task: Task) -> TabularDataset {
    let cells = features.len();
    TabularDataset::from_parts(
        name,
        names(n),
        features,
        vec![1; cells],
        target,
        vec![ColumnKind::Numeric; n],
        task,
        NormRange::ZeroOne,
    )
    .expect("generated shapes are consistent")
}

/// Two uniform features on `[0, 1]`, label `x0 + x1 > 1`.
pub fn linearly_separable(rows: usize, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(rows * 2);
    let mut target = Vec::with_capacity(rows);
    for i in 0..rows {
        // two fixed anchor rows keep both classes present
        let (a, b): (f64, f64) = match i {
            0 => (0.2, 0.3),
            1 => (0.7, 0.8),
            _ => (rng.gen(), rng.gen()),
        };
        features.extend([a, b]);
        target.push(f64::from(u8::from(a + b > 1.0)));
    }
    build("separable", 2, features, target, Task::Classification)
}

/// Gaussian features whose class depends on a noisy linear score.
pub fn logistic_classification(rows: usize, n: usize, noise: f64, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut features = Vec::with_capacity(rows * n);
    let mut target = Vec::with_capacity(rows);
    for i in 0..rows {
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let e: f64 = rng.sample(StandardNormal);
        let score: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + noise * e;
        features.extend(x);
        let label = if i < 2 { i == 1 } else { score > 0.0 };
        target.push(f64::from(u8::from(label)));
    }
    build("logistic", n, features, target, Task::Classification)
}

/// Nonlinear regression stand-in: `y = Σ w_k sin(2 x_k) + 0.1 ε`.
pub fn regression(rows: usize, n: usize, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut features = Vec::with_capacity(rows * n);
    let mut target = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let e: f64 = rng.sample(StandardNormal);
        target.push(x.iter().zip(&w).map(|(a, b)| b * (2.0 * a).sin()).sum::<f64>() + 0.1 * e);
        features.extend(x);
    }
    build("regression", n, features, target, Task::Regression)
}

/// Standard Gaussians with common pairwise correlation `rho` (one shared factor).
pub fn correlated_gaussians(rows: usize, n: usize, rho: f64, seed: u64) -> TabularDataset {
    assert!((0.0..=1.0).contains(&rho), "rho must lie in [0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut features = Vec::with_capacity(rows * n);
    for _ in 0..rows {
        let z: f64 = rng.sample(StandardNormal);
        for _ in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            features.push(a * z + b * e);
        }
    }
    let target = (0..rows).map(|i| (i % 2) as f64).collect();
    build("correlated", n, features, target, Task::Classification)
}
