//! Small dense symmetric-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{MdriError, Result};

/// Symmetry check with an absolute tolerance.
pub fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(MdriError::Matrix("matrix is not square".into()));
    }
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(MdriError::Matrix(format!(
                    "matrix not symmetric at ({i},{j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut eigs: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| a.total_cmp(b));
    eigs
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NAN)
}

/// PSD check: symmetric and all eigenvalues ≥ −tol.
pub fn check_psd(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    check_symmetric(m, tol.max(1e-12))?;
    let min = sym_eigenvalues(m).first().copied().unwrap_or(0.0);
    if min < -tol {
        return Err(MdriError::Matrix(format!(
            "matrix not positive semidefinite: smallest eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// Inverse of a positive definite matrix.
pub fn inverse_pd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m, 1e-10)?;
    m.clone()
        .try_inverse()
        .ok_or_else(|| MdriError::Matrix("singular matrix".into()))
}

/// Pivoted Cholesky factorization of a symmetric PSD matrix.
///
/// Returns `L` with `A = L Lᵀ` (pivoting applied internally, rows of `L`
/// already permuted back), handling semidefinite inputs by stopping when the
/// remaining diagonal falls below `tol · max_diag`. Pivot choice is the
/// largest remaining diagonal entry, ties to the smallest index, so the
/// factor is deterministic.
pub fn pivoted_cholesky(a: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    check_symmetric(a, 1e-8)?;
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let max_diag = diag.iter().cloned().fold(0.0_f64, f64::max).max(1.0);
    let threshold = tol * max_diag;

    for k in 0..n {
        // Pivot: largest remaining diagonal, smallest index on ties.
        let mut piv = k;
        for j in (k + 1)..n {
            if diag[perm[j]] > diag[perm[piv]] {
                piv = j;
            }
        }
        perm.swap(k, piv);
        let pk = perm[k];
        let d = diag[pk];
        if d <= threshold {
            // Remaining block is numerically zero; check it is not negative.
            if d < -threshold.max(1e-10) {
                return Err(MdriError::Matrix(format!(
                    "matrix not positive semidefinite: pivot {d:.3e}"
                )));
            }
            break;
        }
        let root = d.sqrt();
        l[(pk, k)] = root;
        for j in (k + 1)..n {
            let pj = perm[j];
            let mut v = a[(pj, pk)];
            for t in 0..k {
                v -= l[(pj, t)] * l[(pk, t)];
            }
            let val = v / root;
            l[(pj, k)] = val;
            diag[pj] -= val * val;
        }
    }
    Ok(l)
}

/// Largest λ solving the symmetric generalized problem C v = λ B v,
/// B positive definite. Used for Gaussian norms under quadratic generators.
pub fn generalized_lambda_max(c: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(c, 1e-8)?;
    let chol = nalgebra::linalg::Cholesky::new(b.clone())
        .ok_or_else(|| MdriError::Matrix("matrix not positive definite".into()))?;
    let l = chol.l();
    // L⁻¹ C L⁻ᵀ is symmetric and carries the generalized spectrum.
    let mut x = c.clone();
    if !l.solve_lower_triangular_mut(&mut x) {
        return Err(MdriError::Matrix("triangular solve failed".into()));
    }
    let mut s = x.transpose();
    if !l.solve_lower_triangular_mut(&mut s) {
        return Err(MdriError::Matrix("triangular solve failed".into()));
    }
    let sym = 0.5 * (&s + s.transpose());
    Ok(lambda_max(&sym))
}

/// Quadratic form (M x, x).
pub fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (m * x).dot(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pivoted_cholesky_reconstructs_pd() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]);
        let l = pivoted_cholesky(&a, 1e-14).unwrap();
        let r = &l * l.transpose();
        assert!((&r - &a).abs().max() < 1e-12);
    }

    #[test]
    fn pivoted_cholesky_handles_semidefinite() {
        // Rank-1 matrix.
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a = &v * v.transpose();
        let l = pivoted_cholesky(&a, 1e-14).unwrap();
        let r = &l * l.transpose();
        assert!((&r - &a).abs().max() < 1e-12);
    }

    #[test]
    fn pivoted_cholesky_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(pivoted_cholesky(&a, 1e-14).is_err());
    }

    #[test]
    fn lambda_max_diag() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        assert!((lambda_max(&a) - 4.0).abs() < 1e-12);
    }
}
