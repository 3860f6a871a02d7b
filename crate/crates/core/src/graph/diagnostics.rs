//! Dense checks of the structural guarantees behind the implicit graph.
//! Everything here is O((n+k)³) and capped to small problems.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{GraphFactor, Variant};
use crate::error::{Error, Result};

/// Largest `n + k` accepted by [`spectral_diagnostics`].
pub const SPECTRAL_CAP: usize = 300;

const EIG_TOL: f64 = 1e-8;
const COMMUTE_TOL: f64 = 1e-10;
const SYM_TOL: f64 = 1e-10;
const NONNEG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n: usize,
    pub k: usize,
    pub variant: Variant,
    pub alpha: f64,
    pub eta: f64,

    /// `max |Im λ|` over the spectrum of the transition matrix `P`.
    pub p_max_imag: f64,
    pub p_min_real: f64,
    pub p_max_real: f64,
    /// `‖P1 − 1‖∞`.
    pub p_row_sum_err: f64,
    pub p_spectrum_ok: bool,

    pub ptilde_max_imag: f64,
    pub ptilde_min_real: f64,
    pub ptilde_max_real: f64,
    /// `1 − max |λ(P̃)|`; positive means the spectrum is strictly inside (−1, 1).
    pub ptilde_margin: f64,
    pub ptilde_spectrum_ok: bool,

    /// `‖P²(I−αP)⁻¹ − (I−αP)⁻¹P²‖_F / ‖P²(I−αP)⁻¹‖_F`.
    pub commutation_rel_err: f64,
    pub commutation_ok: bool,
    /// Relative Frobenius distance between the factor's W and the top-left
    /// block of `P²(I−αP)⁻¹`; only meaningful for the exact graph.
    pub block_rel_err: Option<f64>,

    pub w_asymmetry: f64,
    pub w_min_entry: f64,
    pub w_symmetric_nonnegative: bool,

    pub row_sum_min: f64,
    pub row_sum_max: f64,
    pub row_sum_bound: f64,
    pub row_sums_ok: bool,

    pub laplacian_min_eig: f64,
    pub laplacian_max_eig: f64,
    pub laplacian_bound: f64,
    pub laplacian_ok: bool,

    pub all_pass: bool,
}

/// Dense `(n+k) × (n+k)` random-walk matrix `P = Γ⁻¹Q` with
/// `Q = [[0, Z], [Zᵀ, ηG]]` and `Γ = diag(Q1)`.
pub fn dense_transition(factor: &GraphFactor, cap: usize) -> Result<DMatrix<f64>> {
    let (n, k) = (factor.n(), factor.k());
    if n + k > cap {
        return Err(Error::DenseCapExceeded { n: n + k, cap });
    }
    let z = factor.z();
    let mut q = DMatrix::zeros(n + k, n + k);
    q.view_mut((0, n), (n, k)).copy_from(z);
    q.view_mut((n, 0), (k, n)).copy_from(&z.transpose());
    q.view_mut((n, n), (k, k)).copy_from(&(factor.adjacency() * factor.eta()));
    for mut row in q.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    Ok(q)
}

pub fn spectral_diagnostics(factor: &GraphFactor) -> Result<SpectralReport> {
    let (n, k) = (factor.n(), factor.k());
    let alpha = factor.alpha();
    let p = dense_transition(factor, SPECTRAL_CAP)?;
    let dim = n + k;

    let p_eigs = p.complex_eigenvalues();
    let p_max_imag = p_eigs.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    let p_min_real = p_eigs.iter().fold(f64::INFINITY, |m, c| m.min(c.re));
    let p_max_real = p_eigs.iter().fold(f64::NEG_INFINITY, |m, c| m.max(c.re));
    let p_row_sum_err = p.row_iter().fold(0.0f64, |m, r| m.max((r.sum() - 1.0).abs()));
    let p_spectrum_ok = p_max_imag <= EIG_TOL
        && p_min_real >= -1.0 - EIG_TOL
        && p_max_real <= 1.0 + EIG_TOL
        && p_row_sum_err <= EIG_TOL;

    // P̃ = αηE⁻¹G + α²E⁻¹ZᵀZ
    let mut ptilde = factor.adjacency() * (alpha * factor.eta()) + factor.gram() * (alpha * alpha);
    for (r, mut row) in ptilde.row_iter_mut().enumerate() {
        row /= factor.e()[r];
    }
    let pt_eigs = ptilde.complex_eigenvalues();
    let ptilde_max_imag = pt_eigs.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    let ptilde_min_real = pt_eigs.iter().fold(f64::INFINITY, |m, c| m.min(c.re));
    let ptilde_max_real = pt_eigs.iter().fold(f64::NEG_INFINITY, |m, c| m.max(c.re));
    let ptilde_margin = 1.0 - pt_eigs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let ptilde_spectrum_ok = ptilde_max_imag <= EIG_TOL && ptilde_margin > 0.0;

    let resolvent = (DMatrix::identity(dim, dim) - &p * alpha)
        .lu()
        .try_inverse()
        .ok_or(Error::Singular { pivot: 0.0 })?;
    let p2 = &p * &p;
    let left = &p2 * &resolvent;
    let right = &resolvent * &p2;
    let commutation_rel_err = (&left - &right).norm() / left.norm().max(f64::MIN_POSITIVE);
    let commutation_ok = commutation_rel_err <= COMMUTE_TOL;

    let w = factor.dense_w()?;
    let block_rel_err = match factor.variant() {
        Variant::Exact => {
            let block = left.view((0, 0), (n, n));
            Some((&w - block).norm() / block.norm().max(f64::MIN_POSITIVE))
        }
        _ => None,
    };

    let w_asymmetry = (&w - w.transpose()).amax();
    let w_min_entry = w.min();
    let w_symmetric_nonnegative = w_asymmetry <= SYM_TOL * w.amax().max(1.0) && w_min_entry >= -NONNEG_TOL;

    let sums = factor.row_sums();
    let row_sum_min = sums.min();
    let row_sum_max = sums.max();
    let row_sum_bound = factor.row_sum_bound();
    let row_sums_ok = row_sum_min >= -1e-10 && row_sum_max <= row_sum_bound + EIG_TOL;

    let mut lap = -w;
    for i in 0..n {
        lap[(i, i)] += sums[i];
    }
    let lap_eigs = SymmetricEigen::new(lap).eigenvalues;
    let laplacian_min_eig = lap_eigs.min();
    let laplacian_max_eig = lap_eigs.max();
    let laplacian_bound = 2.0 * row_sum_bound;
    let laplacian_ok = laplacian_min_eig >= -EIG_TOL && laplacian_max_eig <= laplacian_bound + EIG_TOL;

    let all_pass = p_spectrum_ok
        && ptilde_spectrum_ok
        && commutation_ok
        && block_rel_err.is_none_or(|e| e <= 1e-10)
        && w_symmetric_nonnegative
        && row_sums_ok
        && laplacian_ok;

    Ok(SpectralReport {
        n,
        k,
        variant: factor.variant(),
        alpha,
        eta: factor.eta(),
        p_max_imag,
        p_min_real,
        p_max_real,
        p_row_sum_err,
        p_spectrum_ok,
        ptilde_max_imag,
        ptilde_min_real,
        ptilde_max_real,
        ptilde_margin,
        ptilde_spectrum_ok,
        commutation_rel_err,
        commutation_ok,
        block_rel_err,
        w_asymmetry,
        w_min_entry,
        w_symmetric_nonnegative,
        row_sum_min,
        row_sum_max,
        row_sum_bound,
        row_sums_ok,
        laplacian_min_eig,
        laplacian_max_eig,
        laplacian_bound,
        laplacian_ok,
        all_pass,
    })
}
