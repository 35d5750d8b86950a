//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues within this distance of zero are reported as exactly zero.
pub const EIGEN_CLAMP: f64 = 1e-10;

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn sym_eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 1 {
        return (clamp(m[(0, 0)]), clamp(m[(0, 0)]));
    }
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (clamp(lo), clamp(hi))
}

pub fn clamp(v: f64) -> f64 {
    if v.abs() <= EIGEN_CLAMP {
        0.0
    } else {
        v
    }
}

/// Principal submatrix `m[idx, idx]`.
pub fn principal(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Solves `a x = rhs` by LU with one round of iterative refinement.
/// Returns `None` when the factorization is singular or the result is not finite.
pub fn solve_refined(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.clone().lu();
    let mut x = lu.solve(rhs)?;
    let resid = rhs - a * &x;
    if let Some(dx) = lu.solve(&resid) {
        x += dx;
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Null vector of a wide `r x (r + 1)` matrix, or `None` when the null space
/// is not one dimensional at tolerance `tol` (relative to the largest singular value).
pub fn null_vector(k: &DMatrix<f64>, tol: f64) -> Option<DVector<f64>> {
    let (r, c) = k.shape();
    debug_assert_eq!(c, r + 1);
    let mut sq = DMatrix::zeros(c, c);
    sq.view_mut((0, 0), (r, c)).copy_from(k);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t?;
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    // the padded zero row guarantees one zero singular value; a second one means
    // the facet does not determine a line
    if c > 1 && sv[order[1]] <= tol * smax.max(1.0) {
        return None;
    }
    Some(v_t.row(order[0]).transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes_of_equicorrelation() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let (lo, hi) = sym_eigen_extremes(&m);
        assert!((lo - 0.5).abs() < 1e-14);
        assert!((hi - 1.5).abs() < 1e-14);
    }

    #[test]
    fn null_vector_of_wide_system() {
        let k = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, -1.0]);
        let v = null_vector(&k, 1e-12).unwrap();
        assert!((&k * &v).norm() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refined_solve_recovers_solution() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let rhs = &a * &x;
        let got = solve_refined(&a, &rhs).unwrap();
        assert!((got - x).amax() < 1e-14);
        assert!(solve_refined(&DMatrix::zeros(2, 2), &DVector::zeros(2)).is_none());
    }
}
