//! Headerless numeric CSV: one record per line, comma separated, LF endings.
//! Floats are written in Rust's shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nero_core::Matrix;

use crate::error::{Error, Result};

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn push_row<T: std::fmt::Debug>(out: &mut String, row: &[T]) {
    for (j, v) in row.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        write!(out, "{v:?}").expect("writing to a String cannot fail");
    }
    out.push('\n');
}

pub(crate) fn matrix_text(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        push_row(&mut out, row);
    }
    out
}

pub(crate) fn column_text<T: std::fmt::Debug>(values: &[T]) -> String {
    let mut out = String::new();
    for v in values {
        push_row(&mut out, std::slice::from_ref(v));
    }
    out
}

/// Reads an `rows x cols` table, checking every count. `rows = None` accepts
/// any number of lines.
fn read_table<T: FromStr>(
    path: &Path,
    rows: Option<usize>,
    cols: usize,
    mut check: impl FnMut(&T, u64, usize) -> Result<()>,
) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let mut out = Vec::with_capacity(rows.unwrap_or(0) * cols);
    let mut count = 0usize;
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                path: path.into(),
                line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(count as u64 + 1, |p| p.line());
        if record.len() != cols {
            return Err(Error::DimensionMismatch {
                path: path.into(),
                what: "column count",
                expected: cols,
                found: record.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: T = field.parse().map_err(|e: T::Err| Error::Parse {
                path: path.into(),
                line,
                column: j + 1,
                message: format!("cannot parse {field:?}: {e}"),
            })?;
            check(&v, line, j + 1)?;
            out.push(v);
        }
        count += 1;
    }
    if let Some(expected) = rows {
        if count != expected {
            return Err(Error::DimensionMismatch {
                path: path.into(),
                what: "row count",
                expected,
                found: count,
            });
        }
    }
    Ok(out)
}

fn finite(path: &Path) -> impl Fn(&f64, u64, usize) -> Result<()> + '_ {
    move |v, line, column| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFiniteValue {
                path: path.into(),
                line,
                column,
            })
        }
    }
}

pub(crate) fn read_matrix(path: &Path, rows: Option<usize>, cols: usize) -> Result<Matrix> {
    let data = read_table(path, rows, cols, finite(path))?;
    let n = data.len() / cols.max(1);
    Ok(Matrix::new(n, cols, data)?)
}

pub(crate) fn read_vector(path: &Path, len: usize) -> Result<Vec<f64>> {
    read_table(path, Some(1), len, finite(path))
}

pub(crate) fn read_integers<T: FromStr>(
    path: &Path,
    rows: Option<usize>,
    check: impl FnMut(&T, u64, usize) -> Result<()>,
) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    read_table(path, rows, 1, check)
}
