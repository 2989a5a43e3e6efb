//! JSON model files for a fitted detector.
//!
//! The final layer is not stored; it comes from the bundle being scored and
//! is checked against a SHA-256 digest taken at fit time.

use std::path::Path;

use nero_core::detector::FitStats;
use nero_core::{LambdaMode, Matrix, NeroModel, NormMode, Projection, YMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle_io::{read_json, write_json};
use crate::error::{Error, Result};

pub const FORMAT: &str = "nero-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionFile {
    pub center: Vec<f64>,
    /// `d` rows of `z` entries.
    pub basis: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub d: usize,
    pub classes: usize,
    pub z: usize,
    pub k: usize,
    pub lambda: f64,
    pub eps: f64,
    pub y_mode: YMode,
    pub lambda_mode: LambdaMode,
    pub norm: NormMode,
    pub projection: ProjectionFile,
    pub centroids: Vec<Vec<f64>>,
    pub fit_stats: FitStats,
    pub params_sha256: String,
}

/// Digest of the final layer: shape as little-endian `u64`s, then weights
/// row-major and bias as little-endian `f64` bits.
pub fn params_hash(weights: &Matrix, bias: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((weights.rows() as u64).to_le_bytes());
    h.update((weights.cols() as u64).to_le_bytes());
    for v in weights.as_slice().iter().chain(bias) {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl ModelFile {
    pub fn from_model(m: &NeroModel) -> Self {
        ModelFile {
            format: FORMAT.into(),
            d: m.d(),
            classes: m.classes(),
            z: m.z(),
            k: m.k,
            lambda: m.lambda,
            eps: m.eps,
            y_mode: m.y_mode,
            lambda_mode: m.lambda_mode,
            norm: m.norm,
            projection: ProjectionFile {
                center: m.projection.center.clone(),
                basis: m.projection.basis.row_iter().map(<[f64]>::to_vec).collect(),
                explained_variance: m.projection.explained_variance.clone(),
            },
            centroids: m.centroids.clone(),
            fit_stats: m.stats,
            params_sha256: params_hash(&m.weights, &m.bias),
        }
    }

    /// Rebuilds the detector around the given final layer, refusing
    /// parameters other than the ones it was fit on.
    pub fn into_model(self, weights: &Matrix, bias: &[f64]) -> Result<NeroModel> {
        let found = params_hash(weights, bias);
        if found != self.params_sha256 {
            return Err(Error::ModelMismatch {
                expected: self.params_sha256,
                found,
            });
        }
        let bad = |msg: String| Error::config(format!("malformed model file: {msg}"));
        if self.format != FORMAT {
            return Err(bad(format!("unknown format {:?}", self.format)));
        }
        let basis = Matrix::from_rows(&self.projection.basis)?;
        if basis.rows() != self.d || basis.cols() != self.z {
            return Err(bad(format!(
                "basis is {}x{}, expected {}x{}",
                basis.rows(),
                basis.cols(),
                self.d,
                self.z
            )));
        }
        if self.projection.center.len() != self.d || self.projection.explained_variance.len() != self.z {
            return Err(bad("projection vector lengths".into()));
        }
        if self.centroids.len() != self.classes || self.centroids.iter().any(|c| c.len() != self.z) {
            return Err(bad("centroid shape".into()));
        }
        if self.k < 1 || self.k > self.d {
            return Err(bad(format!("k = {} outside [1, {}]", self.k, self.d)));
        }
        Ok(NeroModel {
            projection: Projection {
                center: self.projection.center,
                basis,
                explained_variance: self.projection.explained_variance,
            },
            centroids: self.centroids,
            lambda: self.lambda,
            k: self.k,
            weights: weights.clone(),
            bias: bias.to_vec(),
            eps: self.eps,
            y_mode: self.y_mode,
            lambda_mode: self.lambda_mode,
            norm: self.norm,
            stats: self.fit_stats,
        })
    }
}

pub fn save_model(model: &NeroModel, path: &Path) -> Result<()> {
    write_json(path, &ModelFile::from_model(model))
}

pub fn load_model_file(path: &Path) -> Result<ModelFile> {
    read_json(path)
}

/// Loads a model file and attaches the given final layer.
pub fn load_model(path: &Path, weights: &Matrix, bias: &[f64]) -> Result<NeroModel> {
    load_model_file(path)?.into_model(weights, bias)
}
