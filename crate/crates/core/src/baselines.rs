//! Classical post-hoc OOD scores. Every score follows the convention that
//! higher means more out-of-distribution.

use alloc::vec::Vec;

use crate::bundle::{linear_layer, ArtifactBundle};
use crate::linalg::{spd_inverse, Matrix};
use crate::{Error, Result};

pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_REACT_PERCENTILE: f64 = 90.0;
/// Ridge added to the tied covariance, as a multiple of `trace / d`.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-6;

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `log sum exp(x)` with max subtraction.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = max_of(xs);
    if !m.is_finite() {
        return m;
    }
    m + libm::log(xs.iter().map(|x| libm::exp(x - m)).sum::<f64>())
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = max_of(xs);
    let e: Vec<f64> = xs.iter().map(|x| libm::exp(x - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Negative maximum softmax probability.
pub fn msp(logits: &[f64]) -> f64 {
    -max_of(&softmax(logits))
}

pub fn max_logit(logits: &[f64]) -> f64 {
    -max_of(logits)
}

/// `-T log sum_c exp(l_c / T)`.
pub fn energy(logits: &[f64], temperature: f64) -> f64 {
    let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    -temperature * logsumexp(&scaled)
}

/// Shannon entropy (nats) of the softmax distribution.
pub fn entropy(logits: &[f64]) -> f64 {
    // H = lse(l) - sum_c p_c l_c, which stays exact when some p_c underflow.
    let lse = logsumexp(logits);
    let p = softmax(logits);
    let h = lse - p.iter().zip(logits).map(|(p, l)| p * l).sum::<f64>();
    h.max(0.0)
}

/// How the covariance ridge is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Ridge {
    Absolute(f64),
    /// `scale * trace(Sigma) / d`.
    TraceScaled(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::TraceScaled(DEFAULT_RIDGE_SCALE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MahalanobisModel {
    pub class_means: Vec<Vec<f64>>,
    /// Inverse of the ridge-regularized tied covariance.
    pub shared_precision: Matrix,
    pub ridge: f64,
}

/// Class means plus tied covariance `(1/n) sum_i (a_i - mu_{y_i})(a_i - mu_{y_i})^T + ridge I`.
pub fn fit_mahalanobis(train: &ArtifactBundle, ridge: Ridge) -> Result<MahalanobisModel> {
    let (n, d, classes) = (train.n(), train.d(), train.classes());
    let counts = train.class_counts();
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass { class });
    }
    let mut means = alloc::vec![alloc::vec![0.0; d]; classes];
    for i in 0..n {
        let label = train.labels[i];
        if label < 0 {
            return Err(Error::LabelOutOfRange { row: i, label, classes });
        }
        for (m, &x) in means[label as usize].iter_mut().zip(train.features.row(i)) {
            *m += x;
        }
    }
    for (m, &count) in means.iter_mut().zip(&counts) {
        for x in m.iter_mut() {
            *x /= count as f64;
        }
    }
    let mut cov = Matrix::zeros(d, d);
    let mut diff = alloc::vec![0.0; d];
    for i in 0..n {
        let mu = &means[train.labels[i] as usize];
        for ((o, &x), &m) in diff.iter_mut().zip(train.features.row(i)).zip(mu) {
            *o = x - m;
        }
        for r in 0..d {
            let dr = diff[r];
            let row = cov.row_mut(r);
            for c in 0..d {
                row[c] += dr * diff[c];
            }
        }
    }
    for r in 0..d {
        for c in 0..d {
            let v = cov.get(r, c) / n as f64;
            cov.set(r, c, v);
        }
    }
    let ridge = match ridge {
        Ridge::Absolute(r) => r,
        Ridge::TraceScaled(s) => s * (0..d).map(|i| cov.get(i, i)).sum::<f64>() / d as f64,
    };
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::invalid("ridge", "must be finite and non-negative"));
    }
    for i in 0..d {
        let v = cov.get(i, i) + ridge;
        cov.set(i, i, v);
    }
    let shared_precision = spd_inverse(&cov)?;
    Ok(MahalanobisModel {
        class_means: means,
        shared_precision,
        ridge,
    })
}

impl MahalanobisModel {
    /// Squared Mahalanobis distance to the nearest class mean.
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        let d = self.shared_precision.rows();
        if features.len() != d {
            return Err(Error::DimensionMismatch {
                what: "mahalanobis features",
                expected: d,
                found: features.len(),
            });
        }
        let mut best = f64::INFINITY;
        let mut diff = alloc::vec![0.0; d];
        for mu in &self.class_means {
            for ((o, &x), &m) in diff.iter_mut().zip(features).zip(mu) {
                *o = x - m;
            }
            let q: f64 = (0..d)
                .map(|r| diff[r] * crate::linalg::dot(self.shared_precision.row(r), &diff))
                .sum();
            best = best.min(q.max(0.0));
        }
        Ok(best)
    }
}

/// Energy of the logits recomputed from features clipped at `clip`.
pub fn react_energy(features: &[f64], weights: &Matrix, bias: &[f64], clip: f64, temperature: f64) -> Result<f64> {
    if !clip.is_finite() || !(clip > 0.0) {
        return Err(Error::invalid("clip", "must be finite and positive"));
    }
    if features.len() != weights.rows() {
        return Err(Error::DimensionMismatch {
            what: "react features",
            expected: weights.rows(),
            found: features.len(),
        });
    }
    let clipped: Vec<f64> = features.iter().map(|&a| a.min(clip)).collect();
    Ok(energy(&linear_layer(&clipped, weights, bias), temperature))
}

/// Percentile with linear interpolation between order statistics
/// (`q` in `[0, 100]`).
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("percentile values"));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::invalid("percentile", "must lie in [0, 100]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// ReAct clip value: the given percentile over every feature entry of the
/// training split.
pub fn react_clip(train: &ArtifactBundle, pct: f64) -> Result<f64> {
    percentile(train.features.as_slice(), pct)
}
