//! Small dense complex helpers shared by the receivers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Largest accepted residual `||A x - b||` for a filter solve.
pub(crate) const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// `a^H b`.
pub(crate) fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(Complex64::norm_sqr).sum()
}

/// `acc += alpha * x`.
pub(crate) fn axpy(acc: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += alpha * v;
    }
}

/// Cholesky factorisation of `sum_j v_j v_j^H + diag_load * I`.
///
/// Every solve is checked against the unfactored matrix and refined once if
/// the residual is above [`SOLVE_RESIDUAL_TOL`].
pub(crate) struct LoadedGram {
    matrix: DMatrix<Complex64>,
    chol: nalgebra::Cholesky<Complex64, nalgebra::Dyn>,
}

impl LoadedGram {
    pub(crate) fn new(dim: usize, vectors: &[&[Complex64]], diag_load: f64) -> Result<Self> {
        let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
        for v in vectors {
            crate::error::check_len(dim, v.len())?;
            for c in 0..dim {
                let vc = v[c].conj();
                for r in 0..dim {
                    matrix[(r, c)] += v[r] * vc;
                }
            }
        }
        for i in 0..dim {
            matrix[(i, i)] += Complex64::new(diag_load, 0.0);
        }
        let chol = matrix.clone().cholesky().ok_or_else(|| {
            Error::IllConditioned("matrix is not positive definite".to_string())
        })?;
        Ok(Self { matrix, chol })
    }

    pub(crate) fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        crate::error::check_len(self.matrix.nrows(), rhs.len())?;
        let b = DVector::from_column_slice(rhs);
        let mut x = self.chol.solve(&b);
        let mut residual = &self.matrix * &x - &b;
        if residual.norm() > SOLVE_RESIDUAL_TOL {
            x -= self.chol.solve(&residual);
            residual = &self.matrix * &x - &b;
        }
        let res = residual.norm();
        if !(res <= SOLVE_RESIDUAL_TOL) {
            return Err(Error::IllConditioned(format!(
                "solve residual {res:e} exceeds {SOLVE_RESIDUAL_TOL:e}"
            )));
        }
        Ok(x.as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_h_conjugates_left_operand() {
        let a = [Complex64::new(0.0, 1.0)];
        let b = [Complex64::new(0.0, 1.0)];
        assert_eq!(dot_h(&a, &b), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn rank_one_plus_identity_solve() {
        // (v v^H + I) x = v with unit v gives x = v / 2.
        let v = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let g = LoadedGram::new(2, &[&v], 1.0).unwrap();
        let x = g.solve(&v).unwrap();
        for (xi, vi) in x.iter().zip(&v) {
            assert!((xi - vi / 2.0).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_load_on_rank_deficient_matrix_fails() {
        let v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(LoadedGram::new(2, &[&v], 0.0).is_err());
    }
}
