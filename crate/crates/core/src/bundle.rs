//! The artifact bundle: penultimate features, logits, labels and the final
//! linear layer for one data split.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Label carried by every sample of an OOD split.
pub const OOD_LABEL: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitTag {
    Train,
    TestId,
    TestOod,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::TestId => "test_id",
            SplitTag::TestOod => "test_ood",
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "test_id" => Ok(SplitTag::TestId),
            "test_ood" => Ok(SplitTag::TestOod),
            other => Err(Error::InvalidBundle(format!("unknown split tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactBundle {
    /// `n x d` penultimate activations.
    pub features: Matrix,
    /// `n x C` logits.
    pub logits: Matrix,
    pub labels: Vec<i64>,
    /// `d x C`; row `j` holds the outgoing weights of neuron `j`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub class_names: Vec<String>,
    pub split: SplitTag,
    /// Free-form producer notes (layer name, numeric precision, ...).
    pub metadata: BTreeMap<String, String>,
}

impl ArtifactBundle {
    /// Assembles a bundle and checks every invariant.
    pub fn new(
        features: Matrix,
        logits: Matrix,
        labels: Vec<i64>,
        weights: Matrix,
        bias: Vec<f64>,
        class_names: Vec<String>,
        split: SplitTag,
    ) -> Result<Self> {
        let b = Self {
            features,
            logits,
            labels,
            weights,
            bias,
            class_names,
            split,
            metadata: BTreeMap::new(),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.weights.rows()
    }

    pub fn classes(&self) -> usize {
        self.weights.cols()
    }

    /// Checks shapes, finiteness and label ranges without requiring `n >= 1`.
    pub fn validate_shapes(&self) -> Result<()> {
        let (d, c) = (self.weights.rows(), self.weights.cols());
        if d < 1 {
            return Err(Error::InvalidBundle("d must be at least 1".into()));
        }
        if c < 2 {
            return Err(Error::InvalidBundle("at least two classes are required".into()));
        }
        let n = self.features.rows();
        let checks: [(&'static str, usize, usize); 6] = [
            ("features columns", d, self.features.cols()),
            ("logits rows", n, self.logits.rows()),
            ("logits columns", c, self.logits.cols()),
            ("labels", n, self.labels.len()),
            ("bias", c, self.bias.len()),
            ("class names", c, self.class_names.len()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(Error::DimensionMismatch { what, expected, found });
            }
        }
        for (what, m) in [
            ("features", &self.features),
            ("logits", &self.logits),
            ("weights", &self.weights),
        ] {
            if let Some((row, col)) = m.first_non_finite() {
                return Err(Error::NonFiniteValue { what, row, col });
            }
        }
        if let Some(col) = self.bias.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                what: "bias",
                row: 0,
                col,
            });
        }
        for (row, &label) in self.labels.iter().enumerate() {
            let in_range = label == OOD_LABEL || (label >= 0 && (label as usize) < c);
            if !in_range || (label == OOD_LABEL && self.split == SplitTag::Train) {
                return Err(Error::LabelOutOfRange { row, label, classes: c });
            }
        }
        Ok(())
    }

    /// Full invariant check: shapes, finiteness, labels, `n >= 1`, and class
    /// coverage for training splits.
    pub fn validate(&self) -> Result<()> {
        self.validate_shapes()?;
        if self.n() < 1 {
            return Err(Error::InvalidBundle("bundle has no samples".into()));
        }
        if self.split == SplitTag::Train {
            let counts = self.class_counts();
            if let Some(class) = counts.iter().position(|&n| n == 0) {
                return Err(Error::EmptyClass { class });
            }
        }
        Ok(())
    }

    /// Sample count per class; OOD labels are not counted.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.classes()];
        for &l in &self.labels {
            if l >= 0 {
                counts[l as usize] += 1;
            }
        }
        counts
    }
}

/// Output of the final linear layer, `bias_c + sum_k a_k w_kc`.
///
/// The sum over `k` runs in index order starting from zero and the bias is
/// added last. Relevance denominators, consistency checks and the toy
/// exporter all go through this function so their values agree bit for bit.
pub fn linear_layer(features: &[f64], weights: &Matrix, bias: &[f64]) -> Vec<f64> {
    let mut out = weights.vec_mul(features);
    for (o, b) in out.iter_mut().zip(bias) {
        *o += b;
    }
    out
}

/// Per-sample agreement between stored logits and `features . W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// Max-abs residual of each sample.
    pub residuals: Vec<f64>,
    pub tolerance: f64,
    pub consistent: bool,
}

impl ConsistencyReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub const DEFAULT_CONSISTENCY_TOL: f64 = 1e-4;

pub fn validate_consistency(b: &ArtifactBundle, tol: f64) -> ConsistencyReport {
    let residuals: Vec<f64> = (0..b.n())
        .map(|i| {
            let recomputed = linear_layer(b.features.row(i), &b.weights, &b.bias);
            recomputed
                .iter()
                .zip(b.logits.row(i))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let consistent = residuals.iter().all(|&r| r <= tol);
    ConsistencyReport {
        residuals,
        tolerance: tol,
        consistent,
    }
}
