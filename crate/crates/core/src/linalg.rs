//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::tol::RANK_TOL;

fn to_matrix(rows: &[&[f64]], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
}

/// Orthonormal basis of the span of `rows` (vectors of length `n`), with singular
/// values below `RANK_TOL · σ_max` discarded.
pub fn span_basis(rows: &[&[f64]], n: usize) -> Vec<Vec<f64>> {
    if rows.is_empty() || n == 0 {
        return Vec::new();
    }
    // SVD of the n × k matrix of columns keeps the basis vectors in U
    let m = to_matrix(rows, n).transpose();
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Vec::new();
    }
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > RANK_TOL * smax)
        .map(|(k, _)| u.column(k).iter().cloned().collect())
        .collect()
}

/// Numerical rank of the matrix whose rows are `rows`.
pub fn rank(rows: &[&[f64]], n: usize) -> usize {
    span_basis(rows, n).len()
}

/// Minimum-norm least-squares solution of `A x = b` where `A` has rows `rows`.
/// Returns the solution and the largest absolute residual.
pub fn least_squares(rows: &[&[f64]], n: usize, b: &[f64]) -> (Vec<f64>, f64) {
    let a = to_matrix(rows, n);
    let rhs = DVector::from_column_slice(b);
    let x = pinv_solve(&a, &rhs);
    let r = &a * &x - &rhs;
    let resid = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (x.iter().cloned().collect(), resid)
}

/// `A⁺ b` through a thresholded SVD.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (RANK_TOL * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_rows_have_rank_one() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 4.0, 6.0];
        assert_eq!(rank(&[&a, &b], 3), 1);
        let basis = span_basis(&[&a, &b], 3);
        let n: f64 = basis[0].iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_system_solves_exactly() {
        let r1 = [1.0, 2.0];
        let r2 = [1.0, 0.5];
        let (x, res) = least_squares(&[&r1, &r2], 2, &[1.0, 0.0]);
        assert!(res < 1e-14);
        assert!((x[0] + 1.0 / 3.0).abs() < 1e-14);
        assert!((x[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn inconsistent_system_reports_residual() {
        let r1 = [1.0, 2.0];
        let r2 = [1.0, 1.0];
        let r3 = [1.0, 0.5];
        let (_, res) = least_squares(&[&r1, &r2, &r3], 2, &[1.0, 0.0, 0.0]);
        assert!(res > 1e-3);
    }

    #[test]
    fn zero_matrix_has_empty_span() {
        let z = [0.0, 0.0];
        assert!(span_basis(&[&z], 2).is_empty());
    }
}
