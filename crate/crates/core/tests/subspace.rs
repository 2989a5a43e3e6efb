mod common;

use common::{rng, uniform_matrix};
use nero_core::linalg::{dot, norm2};
use nero_core::subspace::fit_pca;
use nero_core::{Matrix, ZSpec};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

/// 200 x 32 matrix with a decaying spectrum, like a relevance matrix.
fn relevance_like(seed: u64) -> Matrix {
    let mut r = rng(seed);
    let (n, d) = (200, 32);
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let z: f64 = r.sample(StandardNormal);
            m.set(i, j, z * 3.0 / (1.0 + j as f64) + 0.5);
        }
    }
    m
}

fn reconstruction_error(m: &Matrix, z: usize) -> f64 {
    let p = fit_pca(m, ZSpec::Explicit(z)).unwrap();
    m.row_iter()
        .map(|x| {
            let back = p.reconstruct(&p.project(x).unwrap());
            x.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum()
}

fn max_off_identity(basis: &Matrix) -> f64 {
    let z = basis.cols();
    let cols: Vec<Vec<f64>> = (0..z).map(|k| basis.column(k)).collect();
    let mut worst = 0.0f64;
    for a in 0..z {
        for b in 0..z {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot(&cols[a], &cols[b]) - target).abs());
        }
    }
    worst
}

proptest! {
    #[test]
    fn basis_is_orthonormal(n in 3usize..40, d in 1usize..10, seed in any::<u64>()) {
        let m = uniform_matrix(&mut rng(seed), n, d, -5.0, 5.0);
        let z = d.min(n);
        let p = fit_pca(&m, ZSpec::Explicit(z)).unwrap();
        prop_assert!(max_off_identity(&p.basis) <= 1e-9);
    }

    #[test]
    fn projected_training_rows_are_centred(n in 3usize..40, d in 1usize..8, seed in any::<u64>()) {
        let m = uniform_matrix(&mut rng(seed), n, d, -5.0, 5.0);
        let p = fit_pca(&m, ZSpec::Explicit(d.min(n))).unwrap();
        let mut mean = vec![0.0; p.z()];
        for x in m.row_iter() {
            for (s, v) in mean.iter_mut().zip(p.project(x).unwrap()) {
                *s += v / n as f64;
            }
        }
        prop_assert!(mean.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn full_rank_projection_is_an_isometry(seed in any::<u64>()) {
        let m = uniform_matrix(&mut rng(seed), 30, 6, -3.0, 3.0);
        let p = fit_pca(&m, ZSpec::Explicit(6)).unwrap();
        for x in m.row_iter() {
            let centred: Vec<f64> = x.iter().zip(&p.center).map(|(a, c)| a - c).collect();
            let y = p.project(x).unwrap();
            prop_assert!((norm2(&y) - norm2(&centred)).abs() < 1e-9 * norm2(&centred).max(1.0));
        }
    }
}

#[test]
fn reconstruction_error_never_increases_with_z() {
    let m = relevance_like(5);
    let errors: Vec<f64> = (1..=32).map(|z| reconstruction_error(&m, z)).collect();
    for w in errors.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0), "{} then {}", w[0], w[1]);
    }
    assert!(errors[31] < 1e-9 * errors[0]);
}

#[test]
fn independent_fits_agree_bit_for_bit() {
    let a = fit_pca(&relevance_like(9), ZSpec::VarianceFraction(0.9)).unwrap();
    let b = fit_pca(&relevance_like(9), ZSpec::VarianceFraction(0.9)).unwrap();
    let bits = |m: &Matrix| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.basis), bits(&b.basis));
    assert_eq!(a.center, b.center);
    assert_eq!(a.explained_variance, b.explained_variance);
}

#[test]
fn explained_variance_is_sorted_and_matches_projection() {
    let m = relevance_like(13);
    let p = fit_pca(&m, ZSpec::Explicit(8)).unwrap();
    for w in p.explained_variance.windows(2) {
        assert!(w[0] >= w[1]);
    }
    // Sample variance of each projected coordinate equals the reported value.
    let n = m.rows() as f64;
    for k in 0..8 {
        let var: f64 = m.row_iter().map(|x| p.project(x).unwrap()[k].powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - p.explained_variance[k]).abs() < 1e-9 * var);
    }
}

#[test]
fn every_column_has_positive_dominant_entry() {
    let p = fit_pca(&relevance_like(21), ZSpec::Explicit(10)).unwrap();
    for k in 0..10 {
        let col = p.basis.column(k);
        let dominant = col
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        assert!(dominant > 0.0);
    }
}
