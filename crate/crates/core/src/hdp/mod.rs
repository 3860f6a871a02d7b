//! High-dense point learning.
//!
//! Alternates three updates until the centers stop moving:
//!
//! * `G` — minimum spanning tree over the current centers,
//! * `C = XZ(Ξ + λ₁L)⁻¹` with `Ξ = diag(Zᵀ1)` and `L` the tree Laplacian,
//! * `Z` — Gaussian soft assignments of every point to every center.
//!
//! The objective being ascended is the kernel-density log-likelihood of the
//! data under the centers minus a tree-length penalty.

mod bundle;
mod tree;

pub use bundle::{load_bundle, save_bundle};
pub use tree::{fit_spanning_tree, SpanningTree};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, shape, Result};
use crate::kmeans::{kmeans, KmeansConfig};
use crate::linalg::{log_sum_exp, Cholesky};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdpConfig {
    /// Number of high-dense points.
    pub k: usize,
    /// Kernel bandwidth; the kernel is `exp(−‖x − c‖² / 2σ²)`.
    pub sigma: f64,
    /// Weight of the tree-length penalty.
    pub lambda1: f64,
    pub max_outer_iters: usize,
    /// Relative Frobenius change of `C` that counts as converged.
    pub tol: f64,
    pub kmeans: KmeansConfig,
}

impl HdpConfig {
    pub fn new(k: usize, sigma: f64, lambda1: f64) -> Self {
        Self {
            k,
            sigma,
            lambda1,
            max_outer_iters: 50,
            tol: 1e-4,
            kmeans: KmeansConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.lambda1 >= 0.0) || !self.lambda1.is_finite() {
            return Err(invalid(format!("lambda1 must be >= 0, got {}", self.lambda1)));
        }
        if !(self.tol > 0.0) {
            return Err(invalid(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdpModel {
    /// High-dense points, d × k.
    pub centers: DMatrix<f64>,
    /// Soft assignments, n × k, strictly positive and row-stochastic.
    pub assignments: DMatrix<f64>,
    pub tree: SpanningTree,
    /// Joint objective at initialization and after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub config: HdpConfig,
}

impl HdpModel {
    pub fn n(&self) -> usize {
        self.assignments.nrows()
    }

    pub fn k(&self) -> usize {
        self.assignments.ncols()
    }
}

/// Snapshot handed to the observer of [`fit_hdp_observed`] after each outer
/// iteration.
#[derive(Debug)]
pub struct HdpStep<'a> {
    pub iteration: usize,
    pub centers: &'a DMatrix<f64>,
    pub assignments: &'a DMatrix<f64>,
    pub tree: &'a SpanningTree,
    pub objective: f64,
    pub relative_change: f64,
    /// Smallest Cholesky pivot of `Ξ + λ₁L` in this iteration.
    pub min_pivot: f64,
}

fn column(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let d = m.nrows();
    &m.as_slice()[j * d..(j + 1) * d]
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Gaussian soft assignments `Z[i,s] ∝ exp(−‖xᵢ − c_s‖²/2σ²)`.
///
/// Each row is normalized after subtracting its largest exponent, and entries
/// are floored at the smallest normal double so that no row ever loses
/// strict positivity.
pub fn update_assignments(x: &DMatrix<f64>, c: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    assert_eq!(x.nrows(), c.nrows(), "feature dimension");
    let (n, k) = (x.ncols(), c.ncols());
    let scale = 1.0 / (2.0 * sigma * sigma);
    let mut rows = vec![0.0; n * k];
    rows.par_chunks_mut(k.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            let xi = column(x, i);
            for (s, v) in row.iter_mut().enumerate() {
                *v = -scale * sq_dist(xi, column(c, s));
            }
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp().max(f64::MIN_POSITIVE);
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        });
    DMatrix::from_row_slice(n, k, &rows)
}

/// Closed-form center update `C = XZ(Ξ + λ₁L)⁻¹`.
pub fn update_centers(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    tree: &SpanningTree,
    lambda1: f64,
) -> Result<DMatrix<f64>> {
    update_centers_with_pivot(x, z, tree, lambda1).map(|(c, _)| c)
}

fn update_centers_with_pivot(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    tree: &SpanningTree,
    lambda1: f64,
) -> Result<(DMatrix<f64>, f64)> {
    if x.ncols() != z.nrows() || z.ncols() != tree.k() {
        return Err(shape(format!(
            "X is {}x{}, Z is {}x{}, tree has {} vertices",
            x.nrows(),
            x.ncols(),
            z.nrows(),
            z.ncols(),
            tree.k()
        )));
    }
    let mut system = tree.laplacian() * lambda1;
    for (s, col) in z.column_iter().enumerate() {
        system[(s, s)] += col.sum();
    }
    let chol = Cholesky::new(&system)?;
    let xz = x * z;
    let ct = chol.solve_mat(&xz.transpose());
    Ok((ct.transpose(), chol.min_pivot()))
}

/// Kernel log-likelihood `Σᵢ log Σ_s exp(−‖xᵢ − c_s‖²/2σ²)` minus
/// `(λ₁/4)·Σ_{r,s} G_rs ‖c_r − c_s‖²`.
pub fn joint_objective(
    x: &DMatrix<f64>,
    c: &DMatrix<f64>,
    tree: &SpanningTree,
    sigma: f64,
    lambda1: f64,
) -> f64 {
    let scale = 1.0 / (2.0 * sigma * sigma);
    let fit: f64 = (0..x.ncols())
        .into_par_iter()
        .map(|i| {
            let xi = column(x, i);
            let logits: Vec<f64> = (0..c.ncols()).map(|s| -scale * sq_dist(xi, column(c, s))).collect();
            log_sum_exp(&logits)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    // Every undirected edge appears twice in Σ_{r,s} G_rs.
    fit - lambda1 / 2.0 * tree.cost(c)
}

/// k-means initialization of the centers.
pub fn kmeans_init(ds: &Dataset, cfg: &HdpConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    Ok(kmeans(ds.features(), cfg.k, &cfg.kmeans)?.centers)
}

pub fn fit_hdp(ds: &Dataset, cfg: &HdpConfig) -> Result<HdpModel> {
    let init = kmeans_init(ds, cfg)?;
    fit_hdp_from(ds, cfg, init)
}

/// Runs the alternating loop from the given initial centers.
pub fn fit_hdp_from(ds: &Dataset, cfg: &HdpConfig, init: DMatrix<f64>) -> Result<HdpModel> {
    fit_hdp_observed(ds, cfg, init, |_| {})
}

pub fn fit_hdp_observed<O>(
    ds: &Dataset,
    cfg: &HdpConfig,
    init: DMatrix<f64>,
    mut observe: O,
) -> Result<HdpModel>
where
    O: FnMut(&HdpStep<'_>),
{
    cfg.validate()?;
    let x = ds.features();
    if init.nrows() != x.nrows() || init.ncols() != cfg.k {
        return Err(shape(format!(
            "initial centers are {}x{}, expected {}x{}",
            init.nrows(),
            init.ncols(),
            x.nrows(),
            cfg.k
        )));
    }

    let mut centers = init;
    let mut z = update_assignments(x, &centers, cfg.sigma);
    let mut tree = fit_spanning_tree(&centers);
    let mut trace = vec![joint_objective(x, &centers, &tree, cfg.sigma, cfg.lambda1)];
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=cfg.max_outer_iters {
        iterations = it;
        tree = fit_spanning_tree(&centers);
        let (next, min_pivot) = update_centers_with_pivot(x, &z, &tree, cfg.lambda1)?;
        let change = (&next - &centers).norm() / centers.norm().max(f64::MIN_POSITIVE);
        centers = next;
        z = update_assignments(x, &centers, cfg.sigma);
        let objective = joint_objective(x, &centers, &tree, cfg.sigma, cfg.lambda1);
        trace.push(objective);
        observe(&HdpStep {
            iteration: it,
            centers: &centers,
            assignments: &z,
            tree: &tree,
            objective,
            relative_change: change,
            min_pivot,
        });
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    tree = fit_spanning_tree(&centers);

    Ok(HdpModel {
        centers,
        assignments: z,
        tree,
        objective_trace: trace,
        iterations,
        converged,
        config: *cfg,
    })
}
