use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense Cholesky factorization `A = RᵀR` with `R` upper triangular.
///
/// Unlike `nalgebra::Cholesky` this reports which pivot broke down, which is
/// the only diagnostic worth having when a k×k system built from a learned
/// assignment matrix turns out to be degenerate.
#[derive(Debug, Clone)]
pub struct Cholesky {
    r: DMatrix<f64>,
}

impl Cholesky {
    /// Factorizes the symmetric matrix `a`. Only the upper triangle is read.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(crate::error::shape(format!(
                "cholesky needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let mut r = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let (head, tail) = r.columns_range_pair_mut(..j + 1, j + 1..);
            let col_j = head.column(j);
            let rj = col_j.rows(0, j);
            let pivot = a[(j, j)] - rj.norm_squared();
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, pivot });
            }
            let rjj = pivot.sqrt();
            let mut tail = tail;
            for (off, mut col_i) in tail.column_iter_mut().enumerate() {
                let i = j + 1 + off;
                let dot = rj.dot(&col_i.rows(0, j));
                col_i[j] = (a[(j, i)] - dot) / rjj;
            }
            r[(j, j)] = rjj;
        }
        Ok(Self { r })
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn min_pivot(&self) -> f64 {
        self.r.diagonal().iter().fold(f64::INFINITY, |m, &v| m.min(v * v))
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length");
        // Rᵀ y = b
        for i in 0..n {
            let col = self.r.column(i);
            let mut s = b[i];
            for p in 0..i {
                s -= col[p] * b[p];
            }
            b[i] = s / col[i];
        }
        // R x = y, column oriented
        for i in (0..n).rev() {
            let col = self.r.column(i);
            let xi = b[i] / col[i];
            b[i] = xi;
            for p in 0..i {
                b[p] -= col[p] * xi;
            }
        }
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        assert_eq!(b.nrows(), n, "rhs rows");
        let mut x = b.clone();
        x.as_mut_slice()
            .par_chunks_mut(n.max(1))
            .for_each(|col| self.solve_in_place(col));
        x
    }

    /// Reconstructs `A` from the factor.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.r.tr_mul(&self.r)
    }
}

/// Solves the symmetric system `A X = B`, falling back from Cholesky to a
/// fully pivoted LU when roundoff has pushed `A` off the PD cone.
pub fn solve_symmetric(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(crate::error::shape(format!(
            "system {}x{} with rhs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if let Ok(chol) = Cholesky::new(a) {
        return Ok(chol.solve_mat(b));
    }
    let lu = a.clone().full_piv_lu();
    let u = lu.u();
    let scale = u.diagonal().amax().max(f64::MIN_POSITIVE);
    let pivot = u.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if pivot <= 1e-14 * scale {
        return Err(Error::Singular { pivot });
    }
    lu.solve(b).ok_or(Error::Singular { pivot })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        let b = DMatrix::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        });
        &b * b.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn reconstructs_and_solves() {
        let a = spd(12, 7);
        let chol = Cholesky::new(&a).unwrap();
        assert!((chol.reconstruct() - &a).amax() < 1e-12);
        let b = DMatrix::from_fn(12, 3, |i, j| (i + 2 * j) as f64);
        let x = chol.solve_mat(&b);
        assert!((&a * &x - &b).amax() < 1e-9);
    }

    #[test]
    fn reports_offending_pivot() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        match Cholesky::new(&a) {
            Err(Error::NotPositiveDefinite { index, pivot }) => {
                assert_eq!(index, 2);
                assert!((pivot + 3.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn symmetric_fallback_handles_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[2.0, 3.0]);
        let x = solve_symmetric(&a, &b).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            solve_symmetric(&singular, &b),
            Err(Error::Singular { .. })
        ));
    }
}
