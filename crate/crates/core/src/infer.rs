//! Transductive label inference on an implicit graph.
//!
//! Both methods minimize `tr(FᵀL(W)F) + (λ₂/2)‖F − Y‖²` with the labeled
//! rows of `F` clamped to `Y`:
//!
//! * [`lgc_cg_solve`] solves `(2L₃ + λ₂I)F_u = λ₂Y_u − 2L₂ᵀF_l` one class at a
//!   time with matrix-free conjugate gradient, where `L₃` and `L₂` are the
//!   unlabeled/unlabeled and labeled/unlabeled blocks of `L(W)`;
//! * [`agr_closed_form_solve`] restricts `F = ZA` and solves the k × k system
//!   `(2ZᵀL(W)Z + λ₂ZᵀZ)A = λ₂ZᵀY`.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabelState;
use crate::error::{invalid, shape, Result};
use crate::graph::GraphFactor;
use crate::linalg::{conjugate_gradient, solve_symmetric, CgOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LgcCg,
    AgrClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferConfig {
    pub lambda2: f64,
    pub cg: CgOptions,
    pub method: Method,
}

impl InferConfig {
    pub fn new(lambda2: f64, method: Method) -> Self {
        Self {
            lambda2,
            cg: CgOptions::default(),
            method,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda2 > 0.0) || !self.lambda2.is_finite() {
            return Err(invalid(format!("lambda2 must be positive, got {}", self.lambda2)));
        }
        if !(self.cg.tol > 0.0) {
            return Err(invalid("cg tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    /// CG iterations per class; empty for the closed-form solve.
    pub iterations: Vec<usize>,
    /// Final relative residual per class.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Sample indices of the unlabeled rows, ascending.
    pub indices: Vec<usize>,
    /// `F_u`, one row per entry of `indices`.
    pub scores: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub stats: SolverStats,
}

impl Prediction {
    pub(crate) fn new(indices: Vec<usize>, scores: DMatrix<f64>, stats: SolverStats) -> Self {
        let labels = predict_labels(&scores);
        Self {
            indices,
            scores,
            labels,
            stats,
        }
    }

    /// Percentage of predicted samples whose class matches `truth`.
    pub fn accuracy(&self, truth: &[usize]) -> f64 {
        if self.indices.is_empty() {
            return 100.0;
        }
        let hits = self
            .indices
            .iter()
            .zip(&self.labels)
            .filter(|&(&i, &y)| truth[i] == y)
            .count();
        100.0 * hits as f64 / self.indices.len() as f64
    }

    /// `index,predicted_class,max_score` rows with no header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (r, (&i, &y)) in self.indices.iter().zip(&self.labels).enumerate() {
            writeln!(w, "{i},{y},{}", self.scores[(r, y)])?;
        }
        Ok(())
    }
}

/// Row-wise argmax with ties going to the lowest class index.
pub fn predict_labels(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn check_labels(factor: &GraphFactor, labels: &LabelState) -> Result<()> {
    if labels.n() != factor.n() {
        return Err(shape(format!(
            "label state covers {} samples, graph has {}",
            labels.n(),
            factor.n()
        )));
    }
    if labels.labeled().is_empty() {
        return Err(invalid("at least one labeled sample is required"));
    }
    Ok(())
}

/// Right-hand side `λ₂Y_u − 2L₂ᵀF_l` with `F_l = Y_l`, one column per class.
///
/// `L₂ᵀF_l` is the unlabeled restriction of `L(W)` applied to `F_l` padded
/// with zeros.
pub fn assemble_rhs(factor: &GraphFactor, labels: &LabelState, lambda2: f64) -> Result<DMatrix<f64>> {
    check_labels(factor, labels)?;
    let y = labels.y();
    let mut padded = DMatrix::zeros(y.nrows(), y.ncols());
    for &i in labels.labeled() {
        padded.set_row(i, &y.row(i));
    }
    let w_f = factor.apply_w_mat(&padded)?;
    let d = factor.row_sums();
    let u = labels.unlabeled();
    Ok(DMatrix::from_fn(u.len(), y.ncols(), |r, j| {
        let i = u[r];
        let lap = d[i] * padded[(i, j)] - w_f[(i, j)];
        lambda2 * y[(i, j)] - 2.0 * lap
    }))
}

/// The operator `Φ = 2L₃(W) + λ₂I` on the unlabeled samples, applied as
/// `L₃v = d_u ∘ v − [W(0; v)]_u`.
pub struct LgcSystem<'a> {
    factor: &'a GraphFactor,
    unlabeled: &'a [usize],
    degrees: Vec<f64>,
    lambda2: f64,
}

impl<'a> LgcSystem<'a> {
    pub fn new(factor: &'a GraphFactor, labels: &'a LabelState, lambda2: f64) -> Result<Self> {
        check_labels(factor, labels)?;
        let unlabeled = labels.unlabeled();
        let d = factor.row_sums();
        Ok(Self {
            factor,
            unlabeled,
            degrees: unlabeled.iter().map(|&i| d[i]).collect(),
            lambda2,
        })
    }

    pub fn dim(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let mut padded = vec![0.0; self.factor.n()];
        for (&i, &x) in self.unlabeled.iter().zip(v) {
            padded[i] = x;
        }
        let w = self
            .factor
            .apply_w(&padded)
            .expect("padded vector has the graph's length");
        for (r, &i) in self.unlabeled.iter().enumerate() {
            out[r] = 2.0 * (self.degrees[r] * v[r] - w[i]) + self.lambda2 * v[r];
        }
    }
}

pub fn lgc_cg_solve(factor: &GraphFactor, labels: &LabelState, cfg: &InferConfig) -> Result<Prediction> {
    cfg.validate()?;
    let rhs = assemble_rhs(factor, labels, cfg.lambda2)?;
    let system = LgcSystem::new(factor, labels, cfg.lambda2)?;
    let m = system.dim();
    let columns: Vec<_> = (0..rhs.ncols())
        .into_par_iter()
        .map(|j| {
            let b: Vec<f64> = rhs.column(j).iter().copied().collect();
            conjugate_gradient(|v, out| system.apply(v, out), &b, cfg.cg)
        })
        .collect::<Result<_>>()?;

    let mut scores = DMatrix::zeros(m, rhs.ncols());
    let mut stats = SolverStats::default();
    for (j, sol) in columns.into_iter().enumerate() {
        scores.set_column(j, &nalgebra::DVector::from_vec(sol.x));
        stats.iterations.push(sol.iterations);
        stats.residuals.push(sol.residual);
    }
    Ok(Prediction::new(labels.unlabeled().to_vec(), scores, stats))
}

/// `A* = λ₂(2ZᵀL(W)Z + λ₂ZᵀZ)⁻¹ZᵀY`, a k × c matrix.
pub fn agr_coefficients(factor: &GraphFactor, labels: &LabelState, lambda2: f64) -> Result<DMatrix<f64>> {
    check_labels(factor, labels)?;
    let system = factor.reduced_laplacian() * 2.0 + factor.gram() * lambda2;
    let rhs = factor.z().tr_mul(labels.y()) * lambda2;
    solve_symmetric(&system, &rhs)
}

pub fn agr_closed_form_solve(
    factor: &GraphFactor,
    labels: &LabelState,
    cfg: &InferConfig,
) -> Result<Prediction> {
    cfg.validate()?;
    let a = agr_coefficients(factor, labels, cfg.lambda2)?;
    let u = labels.unlabeled();
    let z = factor.z();
    let mut z_u = DMatrix::zeros(u.len(), z.ncols());
    for (r, &i) in u.iter().enumerate() {
        z_u.set_row(r, &z.row(i));
    }
    Ok(Prediction::new(u.to_vec(), z_u * a, SolverStats::default()))
}

/// Dispatches on `cfg.method`.
pub fn infer(factor: &GraphFactor, labels: &LabelState, cfg: &InferConfig) -> Result<Prediction> {
    match cfg.method {
        Method::LgcCg => lgc_cg_solve(factor, labels, cfg),
        Method::AgrClosedForm => agr_closed_form_solve(factor, labels, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_rule() {
        let s = DMatrix::from_row_slice(3, 3, &[0.1, 0.9, 0.0, 0.5, 0.5, 0.1, -1.0, -2.0, -0.5]);
        assert_eq!(predict_labels(&s), vec![1, 0, 2]);
        assert!(predict_labels(&DMatrix::zeros(0, 3)).is_empty());
    }

    #[test]
    fn argmax_is_equivariant_under_column_permutation() {
        let s = DMatrix::from_row_slice(2, 3, &[0.3, 0.1, 0.2, -0.1, 0.4, 0.0]);
        let perm = [2, 0, 1];
        let permuted = DMatrix::from_fn(2, 3, |i, j| s[(i, perm[j])]);
        let base = predict_labels(&s);
        let moved = predict_labels(&permuted);
        for (b, m) in base.iter().zip(&moved) {
            assert_eq!(perm[*m], *b);
        }
    }

    #[test]
    fn config_validation() {
        assert!(InferConfig::new(0.0, Method::LgcCg).validate().is_err());
        assert!(InferConfig::new(0.01, Method::AgrClosedForm).validate().is_ok());
    }

    #[test]
    fn csv_rows() {
        let p = Prediction::new(
            vec![3, 7],
            DMatrix::from_row_slice(2, 2, &[0.25, 0.75, 1.5, -1.0]),
            SolverStats::default(),
        );
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "3,1,0.75\n7,0,1.5\n");
        let mut truth = vec![0; 8];
        truth[3] = 1;
        assert_eq!(p.accuracy(&truth), 100.0);
    }
}
