//! Synthetic datasets and toy networks on disk.

use std::path::Path;

use nero_core::synth::{Dataset, ScenarioSpec, ToyModel};
use nero_core::Matrix;

use crate::bundle_io::{create_dir, read_json, write_json};
use crate::csv_io::{column_text, matrix_text, read_integers, read_matrix, write_text};
use crate::error::{Error, Result};

pub const SPEC_FILE: &str = "spec.json";

pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join(SPEC_FILE), &ds.spec)?;
    write_text(&dir.join("train_inputs.csv"), &matrix_text(&ds.train_inputs))?;
    write_text(&dir.join("train_labels.csv"), &column_text(&ds.train_labels))?;
    write_text(&dir.join("test_inputs.csv"), &matrix_text(&ds.test_inputs))?;
    write_text(&dir.join("test_labels.csv"), &column_text(&ds.test_labels))?;
    write_text(&dir.join("ood_inputs.csv"), &matrix_text(&ds.ood_inputs))?;
    write_text(
        &dir.join("id_means.csv"),
        &matrix_text(&Matrix::from_rows(&ds.id_means)?),
    )?;
    write_text(
        &dir.join("ood_means.csv"),
        &matrix_text(&Matrix::from_rows(&ds.ood_means)?),
    )?;
    Ok(())
}

fn labels(path: &Path, classes: usize) -> Result<Vec<usize>> {
    read_integers::<usize>(path, None, |&l, line, _| {
        if l < classes {
            Ok(())
        } else {
            Err(Error::LabelOutOfRange {
                path: path.into(),
                line,
                label: l as i64,
                classes,
            })
        }
    })
}

fn rows(m: Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(<[f64]>::to_vec).collect()
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.into()));
    }
    let spec: ScenarioSpec = read_json(&dir.join(SPEC_FILE))?;
    spec.validate()?;
    let p = spec.input_dim;
    let train_inputs = read_matrix(&dir.join("train_inputs.csv"), None, p)?;
    let train_labels = labels(&dir.join("train_labels.csv"), spec.classes)?;
    let test_inputs = read_matrix(&dir.join("test_inputs.csv"), None, p)?;
    let test_labels = labels(&dir.join("test_labels.csv"), spec.classes)?;
    for (path, inputs, labels) in [
        ("train_labels.csv", &train_inputs, &train_labels),
        ("test_labels.csv", &test_inputs, &test_labels),
    ] {
        if inputs.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                path: dir.join(path),
                what: "row count",
                expected: inputs.rows(),
                found: labels.len(),
            });
        }
    }
    Ok(Dataset {
        train_inputs,
        train_labels,
        test_inputs,
        test_labels,
        ood_inputs: read_matrix(&dir.join("ood_inputs.csv"), None, p)?,
        id_means: rows(read_matrix(&dir.join("id_means.csv"), Some(spec.classes), p)?),
        ood_means: rows(read_matrix(&dir.join("ood_means.csv"), Some(spec.ood_blobs), p)?),
        spec,
    })
}

pub fn write_toy_model(model: &ToyModel, path: &Path) -> Result<()> {
    write_json(path, model)
}

pub fn read_toy_model(path: &Path) -> Result<ToyModel> {
    read_json(path)
}
