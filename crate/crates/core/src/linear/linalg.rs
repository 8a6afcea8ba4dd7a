//! Small dense helpers on top of `nalgebra`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative singular-value threshold for rank decisions.
pub const RANK_RTOL: f64 = 1e-10;
/// Largest condition number accepted for a family that must be independent.
pub const MAX_CONDITION: f64 = 1e12;

pub(crate) fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    a.singular_values().iter().copied().collect()
}

/// Numerical rank with threshold `RANK_RTOL · σ_max`.
pub fn rank(a: &DMatrix<f64>) -> usize {
    let s = singular_values(a);
    let max = s.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > RANK_RTOL * max).count()
}

/// `σ_max / σ_min` over the `min(rows, cols)` singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let s = singular_values(a);
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if s.is_empty() {
        1.0
    } else if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Moore–Penrose pseudo-inverse.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.is_empty() {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let max = singular_values(a).iter().copied().fold(0.0, f64::max);
    a.clone()
        .pseudo_inverse(RANK_RTOL * max.max(f64::MIN_POSITIVE))
        .expect("non-negative threshold")
}

/// Fails with `Degenerate` unless the rows of `a` are independent with
/// condition number at most [`MAX_CONDITION`].
pub(crate) fn require_independent_rows(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.nrows() == 0 {
        return Ok(());
    }
    if a.nrows() > a.ncols() {
        return Err(Error::degenerate(format!(
            "{what}: {} vectors in dimension {}",
            a.nrows(),
            a.ncols()
        )));
    }
    let cond = condition_number(a);
    if cond > MAX_CONDITION {
        return Err(Error::degenerate(format!("{what}: condition number {cond:.3e}")));
    }
    Ok(())
}

/// Orthonormal rows spanning the orthogonal complement of the row space of
/// `a` (an `n_cols`-dimensional space when `a` has no rows).
pub(crate) fn row_space_complement(a: &DMatrix<f64>, n_cols: usize) -> DMatrix<f64> {
    let projector = if a.nrows() == 0 {
        DMatrix::identity(n_cols, n_cols)
    } else {
        DMatrix::identity(n_cols, n_cols) - pinv(a) * a
    };
    let eig = ((&projector + projector.transpose()) * 0.5).symmetric_eigen();
    let keep: Vec<usize> = (0..n_cols).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
    let mut out = DMatrix::zeros(keep.len(), n_cols);
    for (r, &k) in keep.iter().enumerate() {
        out.row_mut(r).copy_from(&eig.eigenvectors.column(k).transpose());
    }
    out
}

/// Rows of `a` above rows of `b`.
pub(crate) fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = a.ncols().max(b.ncols());
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), cols);
    if a.nrows() > 0 {
        out.rows_mut(0, a.nrows()).copy_from(a);
    }
    if b.nrows() > 0 {
        out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_complement() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert_eq!(rank(&a), 1);
        let c = row_space_complement(&a, 3);
        assert_eq!(c.nrows(), 2);
        assert!((&c * a.transpose()).abs().max() < 1e-12);
        assert!((&c * c.transpose() - DMatrix::identity(2, 2)).abs().max() < 1e-12);
        assert_eq!(row_space_complement(&DMatrix::zeros(0, 2), 2).nrows(), 2);
    }

    #[test]
    fn complement_of_random_rows() {
        let a = DMatrix::from_row_slice(2, 5, &[0.7, -0.14, 0.30, -1.37, 1.2, 0.11, 1.36, 0.99, 1.07, -2.06]);
        let c = row_space_complement(&a, 5);
        assert_eq!(c.nrows(), 3);
        assert!((&c * a.transpose()).abs().max() < 1e-12);
        assert!((&c * c.transpose() - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }

    #[test]
    fn pinv_solves_full_row_rank() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        assert!((&a * pinv(&a) - DMatrix::identity(2, 2)).abs().max() < 1e-12);
        assert!(require_independent_rows(&a, "a").is_ok());
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(require_independent_rows(&b, "b").is_err());
    }
}
