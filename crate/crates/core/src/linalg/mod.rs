//! Small dense linear-algebra kernels shared by the learning stages.

pub mod cg;
pub mod cholesky;

pub use cg::{cg_rate, conjugate_gradient, conjugate_gradient_observed, CgOptions, CgSolution};
pub use cholesky::{solve_symmetric, Cholesky};

use nalgebra::DMatrix;
use rayon::prelude::*;

/// Squared Euclidean distances between the columns of `x` (d×n) and the
/// columns of `c` (d×k), returned as an n×k matrix.
pub fn sq_dists(x: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(x.nrows(), c.nrows(), "feature dimension");
    let (n, k) = (x.ncols(), c.ncols());
    let mut rows = vec![0.0; n * k];
    rows.par_chunks_mut(k.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            let d = x.nrows();
            let xi = &x.as_slice()[i * d..(i + 1) * d];
            for (s, out) in row.iter_mut().enumerate() {
                let cs = &c.as_slice()[s * d..(s + 1) * d];
                *out = xi.iter().zip(cs).map(|(a, b)| (a - b) * (a - b)).sum();
            }
        });
    DMatrix::from_row_slice(n, k, &rows)
}

/// `log Σ exp(v)` with the max subtracted first.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|&a| (a - m).exp()).sum::<f64>().ln()
}

/// Symmetric matrix with `a[i][j]` mirrored from the average of both halves.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sq_dists_matches_naive() {
        let x = DMatrix::from_fn(3, 5, |i, j| (i * 7 + j * 3) as f64 * 0.1);
        let c = DMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let d = sq_dists(&x, &c);
        for i in 0..5 {
            for s in 0..2 {
                let e = (x.column(i) - c.column(s)).norm_squared();
                assert!((d[(i, s)] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lse_is_stable() {
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
