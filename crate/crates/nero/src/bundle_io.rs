//! On-disk artifact bundles: `manifest.json` plus headerless CSV tensors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nero_core::bundle::OOD_LABEL;
use nero_core::{ArtifactBundle, SplitTag};
use serde::{Deserialize, Serialize};

use crate::csv_io::{column_text, matrix_text, read_integers, read_matrix, read_text, read_vector, write_text};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleFiles {
    pub features: String,
    pub logits: String,
    pub labels: String,
    pub weights: String,
    pub bias: String,
}

impl Default for BundleFiles {
    fn default() -> Self {
        Self {
            features: "features.csv".into(),
            logits: "logits.csv".into(),
            labels: "labels.csv".into(),
            weights: "weights.csv".into(),
            bias: "bias.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "C")]
    pub classes: usize,
    pub split: SplitTag,
    pub class_names: Vec<String>,
    pub files: BundleFiles,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("in-memory values serialize");
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let m: Manifest = read_json(&path)?;
    let bad = |msg: &str| Error::Parse {
        path: path.clone(),
        line: 0,
        column: 0,
        message: msg.into(),
    };
    if m.n < 1 || m.d < 1 {
        return Err(bad("n and d must be at least 1"));
    }
    if m.classes < 2 {
        return Err(bad("C must be at least 2"));
    }
    if m.class_names.len() != m.classes {
        return Err(Error::DimensionMismatch {
            path,
            what: "class_names length",
            expected: m.classes,
            found: m.class_names.len(),
        });
    }
    Ok(m)
}

/// Loads and fully validates a bundle directory.
pub fn load_bundle(dir: &Path) -> Result<ArtifactBundle> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.into()));
    }
    let m = read_manifest(dir)?;
    let file = |name: &str| -> PathBuf { dir.join(name) };
    let features = read_matrix(&file(&m.files.features), Some(m.n), m.d)?;
    let logits = read_matrix(&file(&m.files.logits), Some(m.n), m.classes)?;
    let weights = read_matrix(&file(&m.files.weights), Some(m.d), m.classes)?;
    let bias = read_vector(&file(&m.files.bias), m.classes)?;
    let labels_path = file(&m.files.labels);
    let labels = read_integers::<i64>(&labels_path, Some(m.n), |&label, line, _| {
        let in_range = label == OOD_LABEL || (label >= 0 && (label as usize) < m.classes);
        if in_range && !(label == OOD_LABEL && m.split == SplitTag::Train) {
            Ok(())
        } else {
            Err(Error::LabelOutOfRange {
                path: labels_path.clone(),
                line,
                label,
                classes: m.classes,
            })
        }
    })?;
    let mut b = ArtifactBundle::new(features, logits, labels, weights, bias, m.class_names, m.split)?;
    b.metadata = m.metadata;
    Ok(b)
}

/// Writes `b` into `dir` (created if needed). Reloading gives back `b`
/// bit for bit.
pub fn write_bundle(b: &ArtifactBundle, dir: &Path) -> Result<()> {
    b.validate()?;
    create_dir(dir)?;
    let files = BundleFiles::default();
    write_text(&dir.join(&files.features), &matrix_text(&b.features))?;
    write_text(&dir.join(&files.logits), &matrix_text(&b.logits))?;
    write_text(&dir.join(&files.labels), &column_text(&b.labels))?;
    write_text(&dir.join(&files.weights), &matrix_text(&b.weights))?;
    let mut bias = String::new();
    crate::csv_io::push_row(&mut bias, &b.bias);
    write_text(&dir.join(&files.bias), &bias)?;
    let manifest = Manifest {
        n: b.n(),
        d: b.d(),
        classes: b.classes(),
        split: b.split,
        class_names: b.class_names.clone(),
        files,
        metadata: b.metadata.clone(),
    };
    write_json(&dir.join(MANIFEST), &manifest)
}
