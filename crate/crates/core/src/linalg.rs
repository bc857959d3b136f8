//! Dense linear-algebra helpers on top of `nalgebra`.
//!
//! Everything here works at desk scale (a few hundred states at most), so dense
//! LU with partial pivoting and full SVDs are used throughout.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest absolute entry of a vector.
pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Largest absolute entry of a matrix (the matrix viewed as a vector).
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn solve(a: &Matrix, b: &Vector) -> Option<Vector> {
    a.clone().lu().solve(b)
}

pub fn solve_matrix(a: &Matrix, b: &Matrix) -> Option<Matrix> {
    a.clone().lu().solve(b)
}

pub fn inverse(a: &Matrix) -> Option<Matrix> {
    a.clone().lu().try_inverse()
}

/// Solves `a x = b` unless the smallest LU pivot falls below `rel_tol * max|a|`.
pub fn solve_with_pivot_check(a: &Matrix, b: &Vector, rel_tol: f64) -> Option<Vector> {
    let scale = max_abs(a);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let min_pivot = u.diagonal().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if min_pivot < rel_tol * scale {
        return None;
    }
    lu.solve(b)
}

/// Singular values in descending order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    sv
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&smax) if smax > 0.0 => sv.iter().filter(|&&s| s > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Eigenvalues of the symmetric part `(m + mᵀ)/2`, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    ev
}

/// Largest real part among the eigenvalues of a general square matrix.
pub fn max_real_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    nalgebra::Schur::new(m.clone())
        .complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re))
}

/// Outcome of [`nonnegative_spectral_radius`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadius {
    /// Collatz–Wielandt upper bound at termination; never below the true radius.
    pub upper: f64,
    pub lower: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Spectral radius of an entrywise-nonnegative matrix by power iteration.
///
/// Iterates on the shifted matrix `|A| + I`, which has the same Perron vector
/// and is aperiodic, so periodic chains do not stall the iteration. With a
/// strictly positive iterate `x`, `min_i (Bx)_i/x_i <= rho(B) <= max_i (Bx)_i/x_i`.
pub fn nonnegative_spectral_radius(a: &Matrix, max_iter: usize, tol: f64) -> SpectralRadius {
    let n = a.nrows();
    let shifted = a.map(f64::abs) + Matrix::identity(n, n);
    let mut x = Vector::from_element(n, 1.0);
    let mut out = SpectralRadius {
        upper: f64::INFINITY,
        lower: 0.0,
        iterations: 0,
        converged: false,
    };
    for it in 1..=max_iter {
        let y = &shifted * &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for (yi, xi) in y.iter().zip(x.iter()) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        out = SpectralRadius {
            upper: hi - 1.0,
            lower: (lo - 1.0).max(0.0),
            iterations: it,
            converged: hi - lo < tol,
        };
        if out.converged {
            break;
        }
        let s = y.sum();
        x = y / s;
    }
    out
}

/// Sum of all entries, `1ᵀ m 1`.
pub fn total_sum(m: &Matrix) -> f64 {
    m.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_radius_of_permutation_and_scaled_identity() {
        let perm = Matrix::from_row_slice(3, 3, &[0., 1., 0., 0., 0., 1., 1., 0., 0.]);
        let r = nonnegative_spectral_radius(&perm, 10_000, 1e-12);
        assert!(r.converged);
        assert!((r.upper - 1.0).abs() < 1e-10);

        let half = Matrix::identity(4, 4) * 0.5;
        let r = nonnegative_spectral_radius(&half, 10_000, 1e-12);
        assert!((r.upper - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_reducible_upper_bound_holds() {
        // Block upper triangular: radius is max(0.9, 0.3).
        let m = Matrix::from_row_slice(2, 2, &[0.3, 0.5, 0.0, 0.9]);
        let r = nonnegative_spectral_radius(&m, 10_000, 1e-12);
        assert!(r.upper >= 0.9 - 1e-12);
        assert!(r.upper < 0.9 + 1e-9);
    }

    #[test]
    fn rank_detects_dependent_columns() {
        let m = Matrix::from_row_slice(3, 2, &[1., 2., 2., 4., 3., 6.]);
        assert_eq!(numerical_rank(&m, 1e-10), 1);
        assert_eq!(numerical_rank(&Matrix::identity(3, 3), 1e-10), 3);
        assert_eq!(numerical_rank(&Matrix::zeros(3, 3), 1e-10), 0);
    }

    #[test]
    fn pivot_check_rejects_singular() {
        let m = Matrix::from_row_slice(2, 2, &[1., 1., 1., 1.]);
        assert!(solve_with_pivot_check(&m, &Vector::from_vec(alloc::vec![1., 1.]), 1e-12).is_none());
        let m = Matrix::from_row_slice(2, 2, &[2., 0., 0., 4.]);
        let x = solve_with_pivot_check(&m, &Vector::from_vec(alloc::vec![2., 2.]), 1e-12).unwrap();
        assert_eq!(x[0], 1.0);
        assert_eq!(x[1], 0.5);
    }

    #[test]
    fn max_real_eigenvalue_rotation() {
        // eigenvalues 0.1 ± i
        let m = Matrix::from_row_slice(2, 2, &[0.1, -1.0, 1.0, 0.1]);
        assert!((max_real_eigenvalue(&m) - 0.1).abs() < 1e-12);
    }
}
