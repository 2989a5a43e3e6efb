#![allow(dead_code)]

use nero_core::bundle::linear_layer;
use nero_core::{ArtifactBundle, Matrix, SplitTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Non-negative features with roughly a quarter exact zeros, like ReLU output.
pub fn relu_like(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            if rng.random_bool(0.25) {
                0.0
            } else {
                rng.random_range(0.0..3.0)
            }
        })
        .collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// A bundle whose logits are exactly `features * W + b`. Train splits cycle
/// labels so every class is present; OOD splits carry -1.
pub fn random_bundle(seed: u64, n: usize, d: usize, c: usize, split: SplitTag) -> ArtifactBundle {
    let mut r = rng(seed);
    let features = relu_like(&mut r, n, d);
    let weights = uniform_matrix(&mut r, d, c, -1.0, 1.0);
    let bias: Vec<f64> = (0..c).map(|_| r.random_range(-1.0..1.0)).collect();
    let rows: Vec<Vec<f64>> = features.row_iter().map(|a| linear_layer(a, &weights, &bias)).collect();
    let logits = Matrix::from_rows(&rows).unwrap();
    let labels = match split {
        SplitTag::TestOod => vec![-1; n],
        _ => (0..n).map(|i| (i % c) as i64).collect(),
    };
    let names = (0..c).map(|k| format!("c{k}")).collect();
    ArtifactBundle::new(features, logits, labels, weights, bias, names, split).unwrap()
}

/// Pairwise `P(ood > id) + P(ood == id) / 2`, counted in integers.
pub fn brute_auroc(id: &[f64], ood: &[f64]) -> f64 {
    let mut twice = 0u64;
    for &o in ood {
        for &i in id {
            twice += if o > i {
                2
            } else if o == i {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / (2 * id.len() * ood.len()) as f64
}

/// Tries every distinct ID score as a threshold, smallest first.
pub fn scan_fpr(id: &[f64], ood: &[f64], tpr: f64) -> (f64, f64) {
    let mut candidates = id.to_vec();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    for t in candidates {
        let accepted_id = id.iter().filter(|&&s| s <= t).count();
        if accepted_id as f64 / id.len() as f64 >= tpr {
            let accepted_ood = ood.iter().filter(|&&s| s <= t).count();
            return (accepted_ood as f64 / ood.len() as f64, t);
        }
    }
    unreachable!("the largest ID score accepts every ID sample")
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
