//! LRP-0 relevance of the penultimate neurons and the bias neuron with
//! respect to the final linear layer.
//!
//! For class `c` let `z_c = b_c + sum_k a_k w_kc`. Neuron `j` receives
//! `sum_c (a_j w_jc / z_c) * y_c` and the bias neuron (activation 1, weight
//! `b_c`) receives `sum_c (b_c / z_c) * y_c`. Classes with `|z_c| <= eps` are
//! skipped. When none are skipped the relevances sum to `sum_c y_c`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::baselines::softmax;
use crate::bundle::{linear_layer, ArtifactBundle};
use crate::linalg::Matrix;
use crate::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-12;

/// Which per-class output is redistributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum YMode {
    /// Raw logits.
    #[default]
    Logit,
    /// Softmax probabilities of the logits.
    Softmax,
}

impl fmt::Display for YMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            YMode::Logit => "logit",
            YMode::Softmax => "softmax",
        })
    }
}

impl FromStr for YMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(YMode::Logit),
            "softmax" => Ok(YMode::Softmax),
            _ => Err(Error::invalid("y_mode", "expected \"logit\" or \"softmax\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceResult {
    pub neuron_relevance: Vec<f64>,
    pub bias_relevance: f64,
    /// Classes dropped because their denominator was within `eps` of zero.
    pub skipped_classes: usize,
}

impl RelevanceResult {
    /// `r_bias + sum_j r_j`.
    pub fn total(&self) -> f64 {
        self.bias_relevance + self.neuron_relevance.iter().sum::<f64>()
    }
}

fn check_dims(features: &[f64], logits: &[f64], weights: &Matrix, bias: &[f64]) -> Result<()> {
    let checks = [
        ("relevance features", weights.rows(), features.len()),
        ("relevance logits", weights.cols(), logits.len()),
        ("relevance bias", weights.cols(), bias.len()),
    ];
    for (what, expected, found) in checks {
        if expected != found {
            return Err(Error::DimensionMismatch { what, expected, found });
        }
    }
    Ok(())
}

/// Relevance of one sample.
pub fn relevance(
    features: &[f64],
    logits: &[f64],
    weights: &Matrix,
    bias: &[f64],
    eps: f64,
    y_mode: YMode,
) -> Result<RelevanceResult> {
    check_dims(features, logits, weights, bias)?;
    if !(eps >= 0.0) {
        return Err(Error::invalid("eps", "must be non-negative"));
    }
    let denoms = linear_layer(features, weights, bias);
    let outputs = match y_mode {
        YMode::Logit => logits.to_vec(),
        YMode::Softmax => softmax(logits),
    };
    let active: Vec<bool> = denoms.iter().map(|z| z.abs() > eps).collect();
    let skipped_classes = active.iter().filter(|a| !**a).count();
    if skipped_classes == denoms.len() {
        return Err(Error::AllClassesDegenerate);
    }

    let mut neuron_relevance = vec![0.0; features.len()];
    for (j, r) in neuron_relevance.iter_mut().enumerate() {
        let a = features[j];
        let w = weights.row(j);
        let mut acc = 0.0;
        for c in 0..denoms.len() {
            if active[c] {
                acc += (a * w[c] / denoms[c]) * outputs[c];
            }
        }
        *r = acc;
    }
    let mut bias_relevance = 0.0;
    for c in 0..denoms.len() {
        if active[c] {
            bias_relevance += (bias[c] / denoms[c]) * outputs[c];
        }
    }
    Ok(RelevanceResult {
        neuron_relevance,
        bias_relevance,
        skipped_classes,
    })
}

/// Relevances of every sample of a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceBatch {
    /// `n x d` neuron relevances.
    pub neuron: Matrix,
    pub bias: Vec<f64>,
    /// Total count of skipped (sample, class) pairs.
    pub skipped_pairs: usize,
}

impl RelevanceBatch {
    pub fn from_results(d: usize, results: Vec<RelevanceResult>) -> Self {
        let mut data = Vec::with_capacity(results.len() * d);
        let mut bias = Vec::with_capacity(results.len());
        let mut skipped_pairs = 0;
        for r in results {
            data.extend_from_slice(&r.neuron_relevance);
            bias.push(r.bias_relevance);
            skipped_pairs += r.skipped_classes;
        }
        let n = bias.len();
        RelevanceBatch {
            neuron: Matrix::new(n, d, data).expect("relevance rows have length d"),
            bias,
            skipped_pairs,
        }
    }
}

/// Relevance of sample `i` of a bundle.
pub fn relevance_of(bundle: &ArtifactBundle, i: usize, eps: f64, y_mode: YMode) -> Result<RelevanceResult> {
    relevance(
        bundle.features.row(i),
        bundle.logits.row(i),
        &bundle.weights,
        &bundle.bias,
        eps,
        y_mode,
    )
    .map_err(|e| e.at_sample(i))
}

pub fn relevance_batch(bundle: &ArtifactBundle, eps: f64, y_mode: YMode) -> Result<RelevanceBatch> {
    let results = (0..bundle.n())
        .map(|i| relevance_of(bundle, i, eps, y_mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(RelevanceBatch::from_results(bundle.d(), results))
}
