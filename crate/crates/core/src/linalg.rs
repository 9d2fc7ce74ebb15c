//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance used for rank decisions and pseudo-inverses.
pub const RANK_RTOL: f64 = 1e-10;

/// Solves `a * x = b` with partial-pivoting LU.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    if is_singular(a) {
        return Err(Error::Singular(what.to_string()));
    }
    a.clone().lu().solve(b).ok_or_else(|| Error::Singular(what.to_string()))
}

/// Solves `a * X = b` for a matrix right-hand side.
pub fn solve_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if is_singular(a) {
        return Err(Error::Singular(what.to_string()));
    }
    a.clone().lu().solve(b).ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    a.clone().svd(false, false).singular_values
}

/// Numerical rank with threshold `RANK_RTOL * sigma_max`.
pub fn rank(a: &DMatrix<f64>) -> usize {
    let sv = singular_values(a);
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * max).count()
}

pub fn is_singular(a: &DMatrix<f64>) -> bool {
    a.nrows() != a.ncols() || rank(a) < a.nrows()
}

/// Moore-Penrose pseudo-inverse, dropping singular values below `RANK_RTOL * sigma_max`.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.max();
    let eps = RANK_RTOL * max;
    svd.pseudo_inverse(eps).expect("svd computed with both singular vector sets")
}

/// Largest singular value (induced 2-norm).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a).max()
}

/// Ratio of extreme singular values; infinite when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = singular_values(a);
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

/// Largest eigenvalue modulus of a general square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Real parts of the eigenvalues of a general square matrix.
pub fn eigenvalue_real_parts(a: &DMatrix<f64>) -> Vec<f64> {
    a.complex_eigenvalues().iter().map(|z| z.re).collect()
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.min()
}

/// `sqrt(v' diag(weights) v)`.
pub fn weighted_norm(v: &DVector<f64>, weights: &DVector<f64>) -> f64 {
    v.iter().zip(weights.iter()).map(|(x, w)| w * x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_deficient_matrix_is_a_generalized_inverse() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 1.0, 0.0, 1.0]);
        assert_eq!(rank(&a), 2);
        let p = pinv(&a);
        let back = &a * &p * &a;
        assert!((back - &a).norm() < 1e-10);
    }

    #[test]
    fn spectral_radius_of_rotation_is_one() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((spectral_radius(&a) - 1.0).abs() < 1e-12);
        assert!(eigenvalue_real_parts(&a).iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn solve_rejects_singular_systems() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(solve(&a, &b, "x"), Err(Error::Singular(_))));
    }
}
