//! Dense symmetric linear algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::{Error, Result};

/// Solution of `A x = λ B x` with `B` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// `B`-orthonormal eigenvectors, one per column, matching `values`.
    pub vectors: DMatrix<f64>,
}

pub fn cholesky(b: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetrized(b)).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

pub fn symmetrized(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..i {
            m = m.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    m
}

/// Generalized symmetric-definite eigenproblem via Cholesky reduction.
pub fn generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    let n = a.nrows();
    if n == 0 {
        return Ok(GeneralizedEigen { values: DVector::zeros(0), vectors: DMatrix::zeros(0, 0) });
    }
    let chol = cholesky(b, "right-hand matrix of generalized eigenproblem")?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let la = l
        .solve_lower_triangular(&symmetrized(a))
        .ok_or_else(|| Error::EigenFailure("triangular solve".into()))?;
    let c = l
        .solve_lower_triangular(&la.transpose())
        .ok_or_else(|| Error::EigenFailure("triangular solve".into()))?;
    let eig = SymmetricEigen::try_new(symmetrized(&c), 1e-15, 10_000)
        .ok_or_else(|| Error::EigenFailure("symmetric QR did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut y = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        y.set_column(col, &eig.eigenvectors.column(i));
    }
    let vectors = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::EigenFailure("back substitution".into()))?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("non-finite eigenvalue".into()));
    }
    Ok(GeneralizedEigen { values, vectors })
}

/// Largest absolute generalized eigenvalue of `(A, diag(d))` for symmetric `A`.
pub fn diag_scaled_spectral_radius(a: &DMatrix<f64>, d: &DVector<f64>) -> Result<f64> {
    let s = scaled_by_diag(a, d);
    let eig = SymmetricEigen::try_new(symmetrized(&s), 1e-15, 10_000)
        .ok_or_else(|| Error::EigenFailure("symmetric QR did not converge".into()))?;
    Ok(eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// `D^{-1/2} A D^{-1/2}`.
pub fn scaled_by_diag(a: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let inv: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * inv[i] * inv[j])
}

/// Largest singular value of `D^{-1/2} A D^{-1/2}`: the norm of `A` as a map from the
/// `d`-weighted space to its dual.
pub fn diag_scaled_operator_norm(a: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    let s = scaled_by_diag(a, d);
    s.singular_values().iter().fold(0.0_f64, |m, v| m.max(*v))
}

/// Ratio of the largest to the smallest eigenvalue of a symmetric positive definite matrix.
pub fn condition_number(a: &DMatrix<f64>) -> Result<f64> {
    let eig = SymmetricEigen::try_new(symmetrized(a), 1e-15, 10_000)
        .ok_or_else(|| Error::EigenFailure("symmetric QR did not converge".into()))?;
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {min}")));
    }
    Ok(max / min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_eigen_of_diagonal_pair() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![6.0, 2.0, 9.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 3.0]));
        let e = generalized_eigen(&a, &b).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        assert!((e.values[2] - 3.0).abs() < 1e-14);
        let xtbx = e.vectors.transpose() * &b * &e.vectors;
        assert!((xtbx - DMatrix::identity(3, 3)).amax() < 1e-13);
    }

    #[test]
    fn rejects_indefinite_right_hand_side() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(generalized_eigen(&a, &b), Err(Error::NotPositiveDefinite(_))));
    }
}
