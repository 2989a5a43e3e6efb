mod common;

use common::{random_bundle, rel_close, relu_like, rng, uniform_matrix};
use nero_core::bundle::linear_layer;
use nero_core::relevance::{relevance, relevance_batch, relevance_of, DEFAULT_EPS};
use nero_core::{Matrix, SplitTag, YMode};
use proptest::prelude::*;
use rand::Rng;

fn layer() -> impl Strategy<Value = (Vec<f64>, Matrix, Vec<f64>)> {
    (1usize..12, 2usize..6).prop_flat_map(|(d, c)| {
        (
            prop::collection::vec(prop_oneof![Just(0.0), 0.0..4.0f64], d),
            prop::collection::vec(-2.0..2.0f64, d * c),
            prop::collection::vec(-1.0..1.0f64, c),
        )
            .prop_map(move |(a, w, b)| (a, Matrix::new(d, c, w).unwrap(), b))
    })
}

fn conserved(a: &[f64], w: &Matrix, b: &[f64], y: &[f64], mode: YMode) -> Result<(), TestCaseError> {
    let r = relevance(a, y, w, b, DEFAULT_EPS, mode).unwrap();
    prop_assume!(r.skipped_classes == 0);
    let target: f64 = match mode {
        YMode::Logit => y.iter().sum(),
        YMode::Softmax => 1.0,
    };
    let err = (r.total() - target).abs();
    prop_assert!(err <= 1e-9 * target.abs().max(1.0), "err {err}");
    Ok(())
}

proptest! {
    #[test]
    fn logit_mode_conserves((a, w, b) in layer()) {
        let y = linear_layer(&a, &w, &b);
        conserved(&a, &w, &b, &y, YMode::Logit)?;
    }

    #[test]
    fn softmax_mode_conserves((a, w, b) in layer()) {
        let y = linear_layer(&a, &w, &b);
        // Tiny denominators amplify rounding far beyond the tolerance.
        prop_assume!(y.iter().all(|v| v.abs() > 1e-3));
        conserved(&a, &w, &b, &y, YMode::Softmax)?;
    }

    #[test]
    fn scaling_the_layer_scales_relevance((a, w, b) in layer(), s in 0.1..10.0f64) {
        let y = linear_layer(&a, &w, &b);
        let base = relevance(&a, &y, &w, &b, DEFAULT_EPS, YMode::Logit).unwrap();
        prop_assume!(base.skipped_classes == 0);
        let ws = Matrix::new(w.rows(), w.cols(), w.as_slice().iter().map(|x| x * s).collect()).unwrap();
        let bs: Vec<f64> = b.iter().map(|x| x * s).collect();
        let ys: Vec<f64> = y.iter().map(|x| x * s).collect();
        let scaled = relevance(&a, &ys, &ws, &bs, DEFAULT_EPS, YMode::Logit).unwrap();
        prop_assume!(scaled.skipped_classes == 0);
        for (r0, r1) in base.neuron_relevance.iter().zip(&scaled.neuron_relevance) {
            prop_assert!(rel_close(r0 * s, *r1, 1e-9));
        }
        prop_assert!(rel_close(base.bias_relevance * s, scaled.bias_relevance, 1e-9));
    }

    #[test]
    fn silent_neurons_get_no_relevance((a, w, b) in layer(), mode in prop_oneof![Just(YMode::Logit), Just(YMode::Softmax)]) {
        let y = linear_layer(&a, &w, &b);
        if let Ok(r) = relevance(&a, &y, &w, &b, DEFAULT_EPS, mode) {
            for (aj, rj) in a.iter().zip(&r.neuron_relevance) {
                if *aj == 0.0 {
                    prop_assert_eq!(rj.abs(), 0.0);
                }
            }
        }
    }

    #[test]
    fn neuron_permutation_permutes_relevance((a, w, b) in layer(), rot in 0usize..12) {
        let d = a.len();
        let perm: Vec<usize> = (0..d).map(|j| (j + rot) % d).collect();
        let pa: Vec<f64> = perm.iter().map(|&j| a[j]).collect();
        let pw = w.select_rows(&perm);
        let y = linear_layer(&a, &w, &b);
        let r = relevance(&a, &y, &w, &b, DEFAULT_EPS, YMode::Logit).unwrap();
        let pr = relevance(&pa, &y, &pw, &b, DEFAULT_EPS, YMode::Logit).unwrap();
        prop_assume!(r.skipped_classes == 0 && pr.skipped_classes == 0);
        for (i, &j) in perm.iter().enumerate() {
            prop_assert!(rel_close(pr.neuron_relevance[i], r.neuron_relevance[j], 1e-9));
        }
    }
}

#[test]
fn thousand_seeded_draws_conserve() {
    let mut r = rng(2024);
    let mut checked = 0;
    for _ in 0..1000 {
        let d = r.random_range(1..40);
        let c = r.random_range(2..8);
        let a = relu_like(&mut r, 1, d);
        let w = uniform_matrix(&mut r, d, c, -2.0, 2.0);
        let b: Vec<f64> = (0..c).map(|_| r.random_range(-1.0..1.0)).collect();
        let y = linear_layer(a.row(0), &w, &b);
        let res = relevance(a.row(0), &y, &w, &b, DEFAULT_EPS, YMode::Logit).unwrap();
        if res.skipped_classes > 0 {
            continue;
        }
        let sum: f64 = y.iter().sum();
        assert!((res.total() - sum).abs() <= 1e-9 * sum.abs().max(1.0));
        checked += 1;
    }
    assert!(checked > 990);
}

#[test]
fn batch_matches_single_sample_bit_for_bit() {
    let b = random_bundle(3, 50, 9, 4, SplitTag::TestId);
    for mode in [YMode::Logit, YMode::Softmax] {
        let batch = relevance_batch(&b, DEFAULT_EPS, mode).unwrap();
        for i in 0..b.n() {
            let one = relevance_of(&b, i, DEFAULT_EPS, mode).unwrap();
            let row: Vec<u64> = batch.neuron.row(i).iter().map(|x| x.to_bits()).collect();
            let single: Vec<u64> = one.neuron_relevance.iter().map(|x| x.to_bits()).collect();
            assert_eq!(row, single);
            assert_eq!(batch.bias[i].to_bits(), one.bias_relevance.to_bits());
        }
    }
}

#[test]
fn logit_mode_reduces_to_column_sums() {
    // With consistent logits every y_c / denom_c is 1.
    let b = random_bundle(11, 20, 6, 3, SplitTag::TestId);
    let col_sums: Vec<f64> = b.weights.row_iter().map(|w| w.iter().sum()).collect();
    let bias_sum: f64 = b.bias.iter().sum();
    for i in 0..b.n() {
        let r = relevance_of(&b, i, DEFAULT_EPS, YMode::Logit).unwrap();
        for (j, rj) in r.neuron_relevance.iter().enumerate() {
            assert!(rel_close(*rj, b.features.get(i, j) * col_sums[j], 1e-12));
        }
        assert!(rel_close(r.bias_relevance, bias_sum, 1e-12));
    }
}
