//! The relevance-centroid OOD detector.
//!
//! Fit: relevance of every training sample, PCA over the relevance matrix,
//! one centroid per class in the projected space, and a weight `lambda`
//! equal to mean centroid distance over mean `|r_bias|` so both terms of the
//! score share a scale.
//!
//! Score: `(min_c ||P(r) - mu_c|| + lambda |r_bias|) * sum_{j in B_k} |f_j|`,
//! where `B_k` holds the `k` neurons of smallest `|r_j|` and `f` is the
//! normalized feature vector.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::bundle::{ArtifactBundle, SplitTag};
use crate::linalg::{euclidean, Matrix};
use crate::relevance::{relevance, relevance_batch, RelevanceResult, YMode, DEFAULT_EPS};
use crate::subspace::{fit_pca, Projection, ZSpec};
use crate::{Error, Result};

/// Below this mean `|r_bias|` the bias term is dropped (`lambda = 0`).
pub const LAMBDA_GUARD: f64 = 1e-12;

/// Which centroid distance enters the `lambda` numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LambdaMode {
    #[default]
    Nearest,
    OwnClass,
}

impl fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LambdaMode::Nearest => "nearest",
            LambdaMode::OwnClass => "own_class",
        })
    }
}

impl FromStr for LambdaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(LambdaMode::Nearest),
            "own_class" | "own-class" => Ok(LambdaMode::OwnClass),
            _ => Err(Error::invalid("lambda_mode", "expected \"nearest\" or \"own_class\"")),
        }
    }
}

/// Per-sample normalization applied to features before the bottom-k sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NormMode {
    #[default]
    L2,
    L1,
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormMode::L2 => "l2",
            NormMode::L1 => "l1",
        })
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(NormMode::L2),
            "l1" => Ok(NormMode::L1),
            _ => Err(Error::invalid("norm", "expected \"l2\" or \"l1\"")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeroConfig {
    pub z_spec: ZSpec,
    /// Bottom-channel count; `None` means `ceil(d / 2)`.
    pub k: Option<usize>,
    pub eps: f64,
    pub y_mode: YMode,
    pub lambda_mode: LambdaMode,
    pub norm: NormMode,
}

impl Default for NeroConfig {
    fn default() -> Self {
        Self {
            z_spec: ZSpec::default(),
            k: None,
            eps: DEFAULT_EPS,
            y_mode: YMode::Logit,
            lambda_mode: LambdaMode::Nearest,
            norm: NormMode::L2,
        }
    }
}

pub fn default_k(d: usize) -> usize {
    d.div_ceil(2)
}

/// Training-set quantities recorded during fit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitStats {
    pub n_train: usize,
    pub skipped_pairs: usize,
    pub mean_distance: f64,
    pub mean_abs_bias_relevance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeroModel {
    pub projection: Projection,
    pub centroids: Vec<Vec<f64>>,
    pub lambda: f64,
    pub k: usize,
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub eps: f64,
    pub y_mode: YMode,
    pub lambda_mode: LambdaMode,
    pub norm: NormMode,
    pub stats: FitStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreBreakdown {
    pub min_distance: f64,
    pub argmin_class: usize,
    pub bias_term: f64,
    pub scale_factor: f64,
    /// `(min_distance + bias_term) * scale_factor`.
    pub score: f64,
}

/// Mean of the projected rows of each class. Every class needs a sample.
pub fn class_centroids(projected: &Matrix, labels: &[i64], classes: usize) -> Result<Vec<Vec<f64>>> {
    let z = projected.cols();
    let mut sums = vec![vec![0.0; z]; classes];
    let mut counts = vec![0usize; classes];
    for (row, &label) in projected.row_iter().zip(labels) {
        if label < 0 || label as usize >= classes {
            continue;
        }
        let c = label as usize;
        counts[c] += 1;
        for (s, &x) in sums[c].iter_mut().zip(row) {
            *s += x;
        }
    }
    if let Some(class) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass { class });
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        for x in s.iter_mut() {
            *x /= n as f64;
        }
    }
    Ok(sums)
}

/// `mean(distances) / mean(bias_abs)`, or zero when the denominator is
/// below [`LAMBDA_GUARD`].
pub fn calibrate_lambda(distances: &[f64], bias_abs: &[f64]) -> f64 {
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let denom = mean(bias_abs);
    if !(denom >= LAMBDA_GUARD) {
        return 0.0;
    }
    mean(distances) / denom
}

/// Distance to the nearest centroid and its index; ties go to the lowest index.
pub fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (c, mu) in centroids.iter().enumerate() {
        let dist = euclidean(point, mu);
        if dist < best.0 {
            best = (dist, c);
        }
    }
    best
}

/// Indices of the `k` smallest `|r_j|`, ties broken by lower index.
pub fn bottom_k(neuron_relevance: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..neuron_relevance.len()).collect();
    idx.sort_by(|&a, &b| {
        neuron_relevance[a]
            .abs()
            .total_cmp(&neuron_relevance[b].abs())
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

pub fn normalize(features: &[f64], norm: NormMode) -> Vec<f64> {
    let n = match norm {
        NormMode::L2 => crate::linalg::norm2(features),
        NormMode::L1 => features.iter().map(|x| x.abs()).sum(),
    };
    if n == 0.0 {
        return vec![0.0; features.len()];
    }
    features.iter().map(|x| x / n).collect()
}

pub fn fit(train: &ArtifactBundle, config: &NeroConfig) -> Result<NeroModel> {
    if train.split != SplitTag::Train {
        return Err(Error::InvalidBundle(alloc::format!(
            "detector must be fit on a train split, got {}",
            train.split
        )));
    }
    let d = train.d();
    let k = config.k.unwrap_or_else(|| default_k(d));
    if k < 1 || k > d {
        return Err(Error::invalid("k", alloc::format!("must lie in [1, {d}], got {k}")));
    }
    let counts = train.class_counts();
    if let Some(class) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass { class });
    }

    let rel = relevance_batch(train, config.eps, config.y_mode)?;
    let projection = fit_pca(&rel.neuron, config.z_spec)?;
    let z = projection.z();
    let mut projected = Matrix::zeros(train.n(), z);
    for (i, row) in rel.neuron.row_iter().enumerate() {
        projected.row_mut(i).copy_from_slice(&projection.project(row)?);
    }
    let centroids = class_centroids(&projected, &train.labels, train.classes())?;

    let distances: Vec<f64> = projected
        .row_iter()
        .zip(&train.labels)
        .map(|(p, &label)| match config.lambda_mode {
            LambdaMode::Nearest => nearest_centroid(p, &centroids).0,
            LambdaMode::OwnClass => euclidean(p, &centroids[label as usize]),
        })
        .collect();
    let bias_abs: Vec<f64> = rel.bias.iter().map(|b| b.abs()).collect();
    let lambda = calibrate_lambda(&distances, &bias_abs);
    let n = train.n() as f64;

    Ok(NeroModel {
        projection,
        centroids,
        lambda,
        k,
        weights: train.weights.clone(),
        bias: train.bias.clone(),
        eps: config.eps,
        y_mode: config.y_mode,
        lambda_mode: config.lambda_mode,
        norm: config.norm,
        stats: FitStats {
            n_train: train.n(),
            skipped_pairs: rel.skipped_pairs,
            mean_distance: distances.iter().sum::<f64>() / n,
            mean_abs_bias_relevance: bias_abs.iter().sum::<f64>() / n,
        },
    })
}

impl NeroModel {
    pub fn d(&self) -> usize {
        self.weights.rows()
    }

    pub fn classes(&self) -> usize {
        self.weights.cols()
    }

    pub fn z(&self) -> usize {
        self.projection.z()
    }

    /// Same model with a different bottom-channel count.
    pub fn with_k(&self, k: usize) -> Result<NeroModel> {
        if k < 1 || k > self.d() {
            return Err(Error::invalid(
                "k",
                alloc::format!("must lie in [1, {}], got {k}", self.d()),
            ));
        }
        let mut m = self.clone();
        m.k = k;
        Ok(m)
    }

    pub fn relevance(&self, features: &[f64], logits: &[f64]) -> Result<RelevanceResult> {
        relevance(features, logits, &self.weights, &self.bias, self.eps, self.y_mode)
    }

    pub fn score(&self, features: &[f64], logits: &[f64]) -> Result<ScoreBreakdown> {
        let rel = self.relevance(features, logits)?;
        self.score_relevance(&rel, features)
    }

    pub fn score_relevance(&self, rel: &RelevanceResult, features: &[f64]) -> Result<ScoreBreakdown> {
        let projected = self.projection.project(&rel.neuron_relevance)?;
        self.score_parts(&projected, rel.bias_relevance, &rel.neuron_relevance, features)
    }

    /// Score from an already projected relevance vector.
    pub fn score_parts(
        &self,
        projected: &[f64],
        bias_relevance: f64,
        neuron_relevance: &[f64],
        features: &[f64],
    ) -> Result<ScoreBreakdown> {
        if features.len() != neuron_relevance.len() {
            return Err(Error::DimensionMismatch {
                what: "score features",
                expected: neuron_relevance.len(),
                found: features.len(),
            });
        }
        if self.k > features.len() {
            return Err(Error::invalid("k", "exceeds the number of features"));
        }
        let (min_distance, argmin_class) = nearest_centroid(projected, &self.centroids);
        let bias_term = self.lambda * bias_relevance.abs();
        let normalized = normalize(features, self.norm);
        let scale_factor: f64 = bottom_k(neuron_relevance, self.k)
            .into_iter()
            .map(|j| normalized[j].abs())
            .sum();
        Ok(ScoreBreakdown {
            min_distance,
            argmin_class,
            bias_term,
            scale_factor,
            score: (min_distance + bias_term) * scale_factor,
        })
    }
}

/// Scores every sample of `bundle` in order.
pub fn score_batch(model: &NeroModel, bundle: &ArtifactBundle) -> Result<Vec<ScoreBreakdown>> {
    (0..bundle.n())
        .map(|i| {
            model
                .score(bundle.features.row(i), bundle.logits.row(i))
                .map_err(|e| e.at_sample(i))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn model_1d(centroids: Vec<Vec<f64>>, lambda: f64, k: usize, d: usize) -> NeroModel {
        NeroModel {
            projection: Projection {
                center: vec![0.0; d],
                basis: Matrix::identity(d),
                explained_variance: vec![1.0; d],
            },
            centroids,
            lambda,
            k,
            weights: Matrix::zeros(d, 2),
            bias: vec![0.0; 2],
            eps: DEFAULT_EPS,
            y_mode: YMode::Logit,
            lambda_mode: LambdaMode::Nearest,
            norm: NormMode::L2,
            stats: FitStats::default(),
        }
    }

    #[test]
    fn zero_base_gives_zero_score() {
        let m = model_1d(vec![vec![0.5], vec![3.0]], 2.0, 1, 1);
        let s = m.score_parts(&[0.5], 0.0, &[0.5], &[7.0]).unwrap();
        assert_eq!(s.min_distance, 0.0);
        assert_eq!(s.argmin_class, 0);
        assert_eq!(s.score, 0.0);
    }

    #[test]
    fn hand_evaluated_score() {
        let m = model_1d(vec![vec![0.0], vec![4.0]], 2.0, 1, 1);
        let s = m.score_parts(&[1.0], 0.5, &[1.0], &[-3.0]).unwrap();
        assert_eq!(s.min_distance, 1.0);
        assert_eq!(s.bias_term, 1.0);
        assert_eq!(s.scale_factor, 1.0);
        assert_eq!(s.score, 2.0);
    }

    #[test]
    fn bottom_k_scaling() {
        // |r| = (5, 1): k = 1 picks the second neuron, f = (0.6, 0.8).
        let mut m = model_1d(vec![vec![0.0, 0.0]], 0.0, 1, 2);
        m.centroids = vec![vec![2.0, 0.0]];
        let s = m.score_parts(&[0.0, 0.0], 0.0, &[5.0, -1.0], &[3.0, 4.0]).unwrap();
        assert_eq!(s.min_distance, 2.0);
        assert!((s.scale_factor - 0.8).abs() < 1e-15);
        assert!((s.score - 1.6).abs() < 1e-15);
    }

    #[test]
    fn bottom_k_ties_take_lowest_index() {
        assert_eq!(bottom_k(&[1.0, -1.0, 0.5, 1.0], 2), vec![2, 0]);
        assert_eq!(bottom_k(&[2.0, 2.0, 2.0], 2), vec![0, 1]);
    }

    #[test]
    fn duplicated_centroids_pick_lowest() {
        let c = vec![vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(nearest_centroid(&[0.1, 0.0], &c), (0.1, 1));
    }

    #[test]
    fn normalize_zero_vector() {
        assert_eq!(normalize(&[0.0, 0.0], NormMode::L2), vec![0.0, 0.0]);
        assert_eq!(normalize(&[3.0, 4.0], NormMode::L2), vec![0.6, 0.8]);
        assert_eq!(normalize(&[1.0, -3.0], NormMode::L1), vec![0.25, -0.75]);
    }

    #[test]
    fn lambda_ratio_of_means() {
        assert_eq!(calibrate_lambda(&[1.0, 3.0], &[1.0, 1.0]), 2.0);
        assert_eq!(calibrate_lambda(&[1.0, 3.0], &[0.0, 0.0]), 0.0);
        assert_eq!(calibrate_lambda(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn centroid_of_identical_points() {
        let p = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert_eq!(class_centroids(&p, &[0, 0], 1).unwrap(), vec![vec![1.0, 2.0]]);
        assert!(matches!(
            class_centroids(&p, &[0, 0], 2),
            Err(Error::EmptyClass { class: 1 })
        ));
    }

    fn tiny_train(split: SplitTag) -> ArtifactBundle {
        // Two duplicated samples per class so every projected relevance sits
        // exactly on its class centroid.
        let features = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 2.0], [0.0, 2.0]]).unwrap();
        let weights = Matrix::from_rows(&[[1.0, -0.5], [0.25, 1.0]]).unwrap();
        let bias = vec![0.1, 0.2];
        let logits_rows: Vec<Vec<f64>> = features
            .row_iter()
            .map(|r| crate::bundle::linear_layer(r, &weights, &bias))
            .collect();
        let mut b = ArtifactBundle::new(
            features,
            Matrix::from_rows(&logits_rows).unwrap(),
            vec![0, 0, 1, 1],
            weights,
            bias,
            vec!["a".to_string(), "b".to_string()],
            SplitTag::Train,
        )
        .unwrap();
        b.split = split;
        b
    }

    #[test]
    fn duplicates_give_zero_lambda() {
        let m = fit(&tiny_train(SplitTag::Train), &NeroConfig::default()).unwrap();
        assert_eq!(m.lambda, 0.0);
        assert_eq!(m.k, 1);
        assert_eq!(m.centroids.len(), 2);
    }

    #[test]
    fn fit_rejects_non_train_and_bad_k() {
        assert!(matches!(
            fit(&tiny_train(SplitTag::TestId), &NeroConfig::default()),
            Err(Error::InvalidBundle(_))
        ));
        let cfg = NeroConfig {
            k: Some(3),
            ..NeroConfig::default()
        };
        assert!(matches!(
            fit(&tiny_train(SplitTag::Train), &cfg),
            Err(Error::InvalidParameter { name: "k", .. })
        ));
    }

    #[test]
    fn empty_batch_scores_nothing() {
        let m = fit(&tiny_train(SplitTag::Train), &NeroConfig::default()).unwrap();
        let mut empty = tiny_train(SplitTag::TestId);
        empty.features = Matrix::zeros(0, 2);
        empty.logits = Matrix::zeros(0, 2);
        empty.labels.clear();
        assert!(score_batch(&m, &empty).unwrap().is_empty());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("own-class".parse::<LambdaMode>().unwrap(), LambdaMode::OwnClass);
        assert_eq!("l1".parse::<NormMode>().unwrap(), NormMode::L1);
        assert!("l3".parse::<NormMode>().is_err());
    }
}
