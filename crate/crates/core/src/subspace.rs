//! PCA projection of relevance vectors.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{right_svd, Matrix};
use crate::{Error, Result};

pub const DEFAULT_VARIANCE_FRACTION: f64 = 0.95;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ZSpec {
    Explicit(usize),
    /// Smallest `z` whose cumulative explained-variance fraction reaches this value.
    VarianceFraction(f64),
}

impl Default for ZSpec {
    fn default() -> Self {
        ZSpec::VarianceFraction(DEFAULT_VARIANCE_FRACTION)
    }
}

/// A fitted PCA projection: `x -> basis^T (x - center)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Projection {
    pub center: Vec<f64>,
    /// `d x z`, orthonormal columns ordered by decreasing singular value.
    pub basis: Matrix,
    /// Sample variance along each kept component (`sigma^2 / (n - 1)`).
    pub explained_variance: Vec<f64>,
}

impl Projection {
    pub fn d(&self) -> usize {
        self.basis.rows()
    }

    pub fn z(&self) -> usize {
        self.basis.cols()
    }

    pub fn project(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.d() {
            return Err(Error::DimensionMismatch {
                what: "projection input",
                expected: self.d(),
                found: r.len(),
            });
        }
        let mut out = vec![0.0; self.z()];
        for (i, (&x, &c)) in r.iter().zip(&self.center).enumerate() {
            let centered = x - c;
            for (o, &b) in out.iter_mut().zip(self.basis.row(i)) {
                *o += centered * b;
            }
        }
        Ok(out)
    }

    /// Maps projected coordinates back to the input space (including the center).
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        (0..self.d())
            .map(|i| {
                let row = self.basis.row(i);
                self.center[i] + row.iter().zip(coords).map(|(b, c)| b * c).sum::<f64>()
            })
            .collect()
    }
}

/// Fits PCA on the rows of `a` (SVD of the column-centered matrix).
///
/// Each basis column is signed so its largest-magnitude entry is positive
/// (lowest index wins ties), which makes the fit deterministic.
pub fn fit_pca(a: &Matrix, z_spec: ZSpec) -> Result<Projection> {
    let (n, d) = (a.rows(), a.cols());
    if n < 2 {
        return Err(Error::invalid("pca rows", "at least two rows are required"));
    }
    if d < 1 {
        return Err(Error::invalid("pca columns", "at least one column is required"));
    }
    let max_z = d.min(n);
    match z_spec {
        ZSpec::Explicit(z) if z < 1 || z > max_z => {
            return Err(Error::invalid(
                "z",
                alloc::format!("explicit z must lie in [1, {max_z}], got {z}"),
            ));
        }
        ZSpec::VarianceFraction(t) if !(t > 0.0 && t <= 1.0) => {
            return Err(Error::invalid("variance fraction", "must lie in (0, 1]"));
        }
        _ => {}
    }

    let mut center = vec![0.0; d];
    for row in a.row_iter() {
        for (c, &x) in center.iter_mut().zip(row) {
            *c += x;
        }
    }
    for c in &mut center {
        *c /= n as f64;
    }
    let mut centered = a.clone();
    for r in 0..n {
        for (x, c) in centered.row_mut(r).iter_mut().zip(&center) {
            *x -= c;
        }
    }

    let svd = right_svd(&centered);
    let mut order: Vec<usize> = (0..d).collect();
    // Stable sort: equal singular values keep the lower column first.
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let variances: Vec<f64> = order
        .iter()
        .take(max_z)
        .map(|&i| svd.singular_values[i] * svd.singular_values[i] / (n - 1) as f64)
        .collect();
    let total: f64 = variances.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("relevance matrix has zero total variance"));
    }

    let z = match z_spec {
        ZSpec::Explicit(z) => z,
        ZSpec::VarianceFraction(tau) => {
            let mut cum = 0.0;
            let mut chosen = max_z;
            for (k, v) in variances.iter().enumerate() {
                cum += v;
                if cum / total >= tau {
                    chosen = k + 1;
                    break;
                }
            }
            chosen
        }
    };

    let mut basis = Matrix::zeros(d, z);
    for (col, &src) in order.iter().take(z).enumerate() {
        let mut pivot = 0;
        for i in 1..d {
            if svd.v.get(i, src).abs() > svd.v.get(pivot, src).abs() {
                pivot = i;
            }
        }
        let sign = if svd.v.get(pivot, src) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            basis.set(i, col, sign * svd.v.get(i, src));
        }
    }

    Ok(Projection {
        center,
        basis,
        explained_variance: variances[..z].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn axis_aligned_variance() {
        let a = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]]).unwrap();
        let p = fit_pca(&a, ZSpec::Explicit(1)).unwrap();
        assert_eq!(p.center, vec![2.0, 0.0]);
        assert!(close(p.basis.get(0, 0), 1.0, 1e-12) && close(p.basis.get(1, 0), 0.0, 1e-12));
        let proj: Vec<f64> = a.row_iter().map(|r| p.project(r).unwrap()[0]).collect();
        for (x, e) in proj.iter().zip([-2.0, 0.0, 2.0]) {
            assert!(close(*x, e, 1e-12));
        }
        assert!(close(p.project(&[6.0, 0.0]).unwrap()[0], 4.0, 1e-12));
        assert!(p.project(&[2.0, 0.0]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn diagonal_variance() {
        let a = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        let p = fit_pca(&a, ZSpec::Explicit(1)).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!(close(p.basis.get(0, 0), h, 1e-12) && close(p.basis.get(1, 0), h, 1e-12));
        let s2 = core::f64::consts::SQRT_2;
        for (row, e) in a.row_iter().zip([-s2, 0.0, s2]) {
            assert!(close(p.project(row).unwrap()[0], e, 1e-12));
        }
    }

    #[test]
    fn variance_fraction_picks_smallest_z() {
        // Variance almost entirely along the first axis.
        let a = Matrix::from_rows(&[[0.0, 0.0], [10.0, 0.1], [20.0, -0.1], [30.0, 0.0]]).unwrap();
        let p = fit_pca(&a, ZSpec::VarianceFraction(0.95)).unwrap();
        assert_eq!(p.z(), 1);
        let p = fit_pca(&a, ZSpec::VarianceFraction(1.0)).unwrap();
        assert_eq!(p.z(), 2);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert!(matches!(
            fit_pca(&a, ZSpec::Explicit(1)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn rejects_bad_z() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]).unwrap();
        assert!(fit_pca(&a, ZSpec::Explicit(0)).is_err());
        assert!(fit_pca(&a, ZSpec::Explicit(3)).is_err());
        assert!(fit_pca(&a, ZSpec::VarianceFraction(0.0)).is_err());
        let one = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
        assert!(fit_pca(&one, ZSpec::Explicit(1)).is_err());
    }

    #[test]
    fn projection_dimension_mismatch() {
        let a = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [4.0, 1.0]]).unwrap();
        let p = fit_pca(&a, ZSpec::Explicit(1)).unwrap();
        assert!(matches!(p.project(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        let a = Matrix::from_rows(&[[0.0, 0.0], [-1.0, -3.0], [1.0, 3.0], [0.5, 1.0]]).unwrap();
        let p = fit_pca(&a, ZSpec::Explicit(2)).unwrap();
        for c in 0..p.z() {
            let col = p.basis.column(c);
            let mut pivot = 0;
            for i in 1..col.len() {
                if col[i].abs() > col[pivot].abs() {
                    pivot = i;
                }
            }
            assert!(col[pivot] > 0.0);
        }
    }
}
