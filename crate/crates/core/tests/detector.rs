mod common;

use common::{random_bundle, rel_close};
use nero_core::detector::{fit, nearest_centroid, score_batch};
use nero_core::linalg::euclidean;
use nero_core::relevance::relevance_batch;
use nero_core::{ArtifactBundle, LambdaMode, Matrix, NeroConfig, SplitTag, ZSpec};
use proptest::prelude::*;

fn config(z: usize) -> NeroConfig {
    NeroConfig {
        z_spec: ZSpec::Explicit(z),
        ..NeroConfig::default()
    }
}

/// Reorders classes: new class `i` is old class `perm[i]`.
fn permute_classes(b: &ArtifactBundle, perm: &[usize]) -> ArtifactBundle {
    let inverse: Vec<usize> = (0..perm.len())
        .map(|c| perm.iter().position(|&p| p == c).unwrap())
        .collect();
    let cols = |m: &Matrix| {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| perm.iter().map(|&c| r[c]).collect()).collect();
        Matrix::from_rows(&rows).unwrap()
    };
    let labels = b
        .labels
        .iter()
        .map(|&l| if l < 0 { l } else { inverse[l as usize] as i64 })
        .collect();
    ArtifactBundle::new(
        b.features.clone(),
        cols(&b.logits),
        labels,
        cols(&b.weights),
        perm.iter().map(|&c| b.bias[c]).collect(),
        perm.iter().map(|&c| b.class_names[c].clone()).collect(),
        b.split,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lambda_balances_distance_and_bias(seed in any::<u64>(), own in any::<bool>()) {
        let train = random_bundle(seed, 60, 8, 3, SplitTag::Train);
        let cfg = NeroConfig {
            lambda_mode: if own { LambdaMode::OwnClass } else { LambdaMode::Nearest },
            ..config(4)
        };
        let m = fit(&train, &cfg).unwrap();
        // Recompute both means independently of the fit.
        let rel = relevance_batch(&train, m.eps, m.y_mode).unwrap();
        let n = train.n() as f64;
        let mut dist = 0.0;
        for (i, r) in rel.neuron.row_iter().enumerate() {
            let p = m.projection.project(r).unwrap();
            dist += if own {
                euclidean(&p, &m.centroids[train.labels[i] as usize])
            } else {
                nearest_centroid(&p, &m.centroids).0
            };
        }
        let bias: f64 = rel.bias.iter().map(|b| b.abs()).sum::<f64>() / n;
        prop_assume!(bias >= 1e-12);
        prop_assert!(rel_close(dist / n, m.lambda * bias, 1e-9));
    }

    #[test]
    fn full_bottom_set_scale_is_at_least_one(seed in any::<u64>()) {
        let train = random_bundle(seed, 40, 7, 3, SplitTag::Train);
        let m = fit(&train, &NeroConfig { k: Some(7), ..config(3) }).unwrap();
        let test = random_bundle(seed ^ 1, 20, 7, 3, SplitTag::TestOod);
        let test = ArtifactBundle::new(
            test.features.clone(),
            Matrix::from_rows(&test.features.row_iter().map(|a| nero_core::bundle::linear_layer(a, &train.weights, &train.bias)).collect::<Vec<_>>()).unwrap(),
            test.labels.clone(),
            train.weights.clone(),
            train.bias.clone(),
            train.class_names.clone(),
            SplitTag::TestOod,
        ).unwrap();
        for (i, s) in score_batch(&m, &test).unwrap().iter().enumerate() {
            if test.features.row(i).iter().any(|&a| a != 0.0) {
                prop_assert!(s.scale_factor >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn class_order_does_not_matter(seed in any::<u64>(), rot in 1usize..3) {
        let train = random_bundle(seed, 45, 6, 3, SplitTag::Train);
        let perm: Vec<usize> = (0..3).map(|c| (c + rot) % 3).collect();
        let permuted = permute_classes(&train, &perm);
        let a = fit(&train, &config(3)).unwrap();
        let b = fit(&permuted, &config(3)).unwrap();
        let sa = score_batch(&a, &train).unwrap();
        let sb = score_batch(&b, &permuted).unwrap();
        for (x, y) in sa.iter().zip(&sb) {
            prop_assert!(rel_close(x.score, y.score, 1e-9));
        }
    }

    #[test]
    fn score_grows_with_distance(seed in any::<u64>(), push in 0.01..10.0f64) {
        let train = random_bundle(seed, 40, 6, 3, SplitTag::Train);
        let m = fit(&train, &config(3)).unwrap();
        let a = train.features.row(0);
        let rel = m.relevance(a, train.logits.row(0)).unwrap();
        let base = m.projection.project(&rel.neuron_relevance).unwrap();
        let near = m.score_parts(&base, rel.bias_relevance, &rel.neuron_relevance, a).unwrap();
        prop_assume!(near.scale_factor > 0.0);
        // Move away from the nearest centroid along the line through it.
        let mu = &m.centroids[near.argmin_class];
        let dir: Vec<f64> = base.iter().zip(mu).map(|(p, c)| p - c).collect();
        let len = euclidean(&base, mu).max(1e-12);
        let far_point: Vec<f64> = base.iter().zip(&dir).map(|(p, d)| p + push * d / len).collect();
        let far = m.score_parts(&far_point, rel.bias_relevance, &rel.neuron_relevance, a).unwrap();
        if far.min_distance > near.min_distance {
            prop_assert!(far.score > near.score);
            prop_assert_eq!(far.scale_factor, near.scale_factor);
            prop_assert_eq!(far.bias_term, near.bias_term);
        }
    }
}

#[test]
fn fit_is_deterministic() {
    let train = random_bundle(4, 80, 10, 4, SplitTag::Train);
    let cfg = NeroConfig::default();
    assert_eq!(fit(&train, &cfg).unwrap(), fit(&train, &cfg).unwrap());
}

#[test]
fn duplicated_centroid_changes_nothing() {
    let train = random_bundle(8, 60, 6, 3, SplitTag::Train);
    let mut m = fit(&train, &config(3)).unwrap();
    let before = score_batch(&m, &train).unwrap();
    let first = m.centroids[0].clone();
    m.centroids.push(first);
    let after = score_batch(&m, &train).unwrap();
    for (a, b) in before.iter().zip(&after) {
        assert_eq!(a.score, b.score);
        assert_eq!(a.argmin_class, b.argmin_class);
    }
}
