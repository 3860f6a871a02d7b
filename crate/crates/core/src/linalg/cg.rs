//! Matrix-free conjugate gradient for symmetric positive definite operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgOptions {
    /// Stop once `‖r‖ ≤ tol·‖b‖`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖r‖/‖b‖`.
    pub residual: f64,
}

/// Solves `A x = b` from `x₀ = 0`. `apply(v, out)` writes `A v` into `out`.
pub fn conjugate_gradient<A>(apply: A, b: &[f64], opts: CgOptions) -> Result<CgSolution>
where
    A: Fn(&[f64], &mut [f64]),
{
    conjugate_gradient_observed(apply, b, opts, |_, _| {})
}

/// Same as [`conjugate_gradient`], calling `observe(t, x_t)` for the
/// starting point (`t = 0`) and after every iteration.
pub fn conjugate_gradient_observed<A, O>(
    apply: A,
    b: &[f64],
    opts: CgOptions,
    mut observe: O,
) -> Result<CgSolution>
where
    A: Fn(&[f64], &mut [f64]),
    O: FnMut(usize, &[f64]),
{
    if !(opts.tol > 0.0) {
        return Err(crate::error::invalid("cg tolerance must be positive"));
    }
    let n = b.len();
    let mut x = vec![0.0; n];
    observe(0, &x);

    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }

    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);

    for it in 1..=opts.max_iters {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite {
                index: it,
                pivot: pap,
            });
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        observe(it, &x);
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / b_norm;
        if rel <= opts.tol {
            return Ok(CgSolution {
                x,
                iterations: it,
                residual: rel,
            });
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        residual: rr.sqrt() / b_norm,
    })
}

/// Contraction factor `(√κ − 1)/(√κ + 1)` of the textbook CG error bound
/// `‖x_t − x*‖_A ≤ 2·ρᵗ·‖x₀ − x*‖_A`.
pub fn cg_rate(kappa: f64) -> f64 {
    let s = kappa.max(1.0).sqrt();
    (s - 1.0) / (s + 1.0)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
