//! Reference semi-supervised methods: dense LGC on a K-NN graph, and AGR
//! with either Nadaraya-Watson (Gaussian) or LAE anchor weights.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelState};
use crate::error::{invalid, shape, Error, Result};
use crate::graph::GraphFactor;
use crate::infer::{agr_closed_form_solve, InferConfig, Method, Prediction, SolverStats};
use crate::kmeans::{kmeans, KmeansConfig};
use crate::linalg::{sq_dists, Cholesky};

/// Largest n accepted by [`lgc_dense`].
pub const LGC_DENSE_CAP: usize = 5000;

pub struct LgcDense {
    /// Full n × c score matrix, labeled rows included.
    pub scores: DMatrix<f64>,
    pub prediction: Prediction,
}

/// Symmetric K-NN affinity with Gaussian weights `exp(−‖xᵢ−xⱼ‖²/2σ²)`.
/// `i ~ j` when either lists the other among its `knn` nearest neighbors.
pub fn knn_affinity(x: &DMatrix<f64>, knn: usize, sigma: f64) -> Result<DMatrix<f64>> {
    let n = x.ncols();
    if n > LGC_DENSE_CAP {
        return Err(Error::DenseCapExceeded { n, cap: LGC_DENSE_CAP });
    }
    if knn == 0 || knn >= n {
        return Err(invalid(format!("neighbor count must be in [1, {}), got {knn}", n)));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    let d2 = sq_dists(x, x);
    let lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| d2[(i, a)].total_cmp(&d2[(i, b)]).then(a.cmp(&b)));
            order.truncate(knn);
            order
        })
        .collect();
    let mut w = DMatrix::zeros(n, n);
    let scale = 2.0 * sigma * sigma;
    for (i, list) in lists.iter().enumerate() {
        for &j in list {
            let v = (-d2[(i, j)] / scale).exp();
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(w)
}

/// `S = D^{−1/2}WD^{−1/2}`; fails on the first vertex with zero degree.
pub fn normalized_affinity(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d: Vec<f64> = w.row_iter().map(|r| r.sum()).collect();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::IsolatedVertex(i));
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    Ok(DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)] * s[i] * s[j]))
}

/// `F = μ((1+μ)I − S)⁻¹Y`.
pub fn lgc_scores(s: &DMatrix<f64>, y: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>> {
    let system = lgc_system(s, mu)?;
    if s.nrows() != y.nrows() {
        return Err(shape("S and Y disagree on n"));
    }
    Ok(system.solve_mat(&(y * mu)))
}

fn lgc_system(s: &DMatrix<f64>, mu: f64) -> Result<Cholesky> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(invalid(format!("mu must be positive, got {mu}")));
    }
    let n = s.nrows();
    Cholesky::new(&(DMatrix::identity(n, n) * (1.0 + mu) - s))
}

/// The label-independent part of LGC: the normalized K-NN affinity and the
/// factorization of `(1+μ)I − S`.
pub struct LgcModel {
    pub s: DMatrix<f64>,
    pub mu: f64,
    system: Cholesky,
}

impl LgcModel {
    pub fn fit(ds: &Dataset, knn: usize, sigma: f64, mu: f64) -> Result<Self> {
        let w = knn_affinity(ds.features(), knn, sigma)?;
        let s = normalized_affinity(&w)?;
        let system = lgc_system(&s, mu)?;
        Ok(Self { s, mu, system })
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn predict(&self, labels: &LabelState) -> Result<LgcDense> {
        if labels.n() != self.n() {
            return Err(shape("label state and graph disagree on n"));
        }
        let scores = self.system.solve_mat(&(labels.y() * self.mu));
        let u = labels.unlabeled();
        let f_u = DMatrix::from_fn(u.len(), scores.ncols(), |r, j| scores[(u[r], j)]);
        Ok(LgcDense {
            scores,
            prediction: Prediction::new(u.to_vec(), f_u, SolverStats::default()),
        })
    }
}

pub fn lgc_dense(ds: &Dataset, labels: &LabelState, knn: usize, sigma: f64, mu: f64) -> Result<LgcDense> {
    if labels.n() != ds.n() {
        return Err(shape("label state and dataset disagree on n"));
    }
    LgcModel::fit(ds, knn, sigma, mu)?.predict(labels)
}

/// Anchor points with the neighborhood size `s_hat` and Gaussian bandwidth `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    /// d × k
    pub u: DMatrix<f64>,
    pub s_hat: usize,
    pub h: f64,
}

impl AnchorSet {
    pub fn new(u: DMatrix<f64>, s_hat: usize, h: f64) -> Result<Self> {
        if s_hat == 0 || s_hat > u.ncols() {
            return Err(invalid(format!("s_hat must be in [1, {}], got {s_hat}", u.ncols())));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(invalid(format!("bandwidth must be positive, got {h}")));
        }
        Ok(Self { u, s_hat, h })
    }

    /// k-means centroids of the dataset as anchors.
    pub fn from_kmeans(ds: &Dataset, k: usize, s_hat: usize, h: f64, cfg: &KmeansConfig) -> Result<Self> {
        Self::new(kmeans(ds.features(), k, cfg)?.centers, s_hat, h)
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    fn check(&self, ds: &Dataset) -> Result<()> {
        if ds.d() != self.u.nrows() {
            return Err(shape(format!("anchors have dimension {}, data {}", self.u.nrows(), ds.d())));
        }
        Ok(())
    }
}

/// Indices of the `s` smallest entries, ties to the lower index.
fn nearest(dists: &[f64], s: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dists.len()).collect();
    order.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b)));
    order.truncate(s);
    order
}

/// Row `i` holds Gaussian weights on the `s_hat` nearest anchors of `xᵢ`,
/// normalized to sum to one.
pub fn agr_gauss_z(ds: &Dataset, anchors: &AnchorSet) -> Result<DMatrix<f64>> {
    anchors.check(ds)?;
    let d2 = sq_dists(ds.features(), &anchors.u);
    let k = anchors.k();
    let scale = 2.0 * anchors.h * anchors.h;
    let rows: Vec<Vec<f64>> = (0..ds.n())
        .into_par_iter()
        .map(|i| {
            let di: Vec<f64> = d2.row(i).iter().copied().collect();
            let nb = nearest(&di, anchors.s_hat);
            // shift by the smallest distance so the largest weight is exactly 1
            let base = di[nb[0]];
            let w: Vec<f64> = nb.iter().map(|&r| (-(di[r] - base) / scale).exp()).collect();
            let total: f64 = w.iter().sum();
            let mut row = vec![0.0; k];
            for (&r, &v) in nb.iter().zip(&w) {
                row[r] = v / total;
            }
            row
        })
        .collect();
    Ok(DMatrix::from_fn(ds.n(), k, |i, r| rows[i][r]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaeOptions {
    pub max_iters: usize,
    /// Stop once the relative objective change drops to this level.
    pub tol: f64,
}

impl Default for LaeOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LaePoint {
    /// Weights on the neighbor anchors, in the order given.
    pub weights: Vec<f64>,
    /// `½‖x − Bz‖²` at the start and after every step.
    pub objective_trace: Vec<f64>,
}

/// Projected gradient on `min ½‖x − Bz‖²` over the probability simplex,
/// with fixed step `1/L`, `L = λmax(BᵀB)`, starting from uniform weights.
pub fn lae_point(x: &[f64], b: &DMatrix<f64>, opts: &LaeOptions) -> LaePoint {
    let s = b.ncols();
    let xv = DVector::from_column_slice(x);
    let h = b.tr_mul(b);
    let bx = b.tr_mul(&xv);
    let objective = |z: &DVector<f64>| 0.5 * (&xv - b * z).norm_squared();
    let lmax = SymmetricEigen::new(h.clone()).eigenvalues.max();

    let mut z = DVector::from_element(s, 1.0 / s as f64);
    let mut trace = vec![objective(&z)];
    if s == 1 || !(lmax > 0.0) {
        return LaePoint {
            weights: z.as_slice().to_vec(),
            objective_trace: trace,
        };
    }
    for _ in 0..opts.max_iters {
        let grad = &h * &z - &bx;
        let step: Vec<f64> = (&z - grad / lmax).iter().copied().collect();
        z = DVector::from_vec(project_simplex(&step));
        let prev = *trace.last().expect("trace starts non-empty");
        let f = objective(&z);
        trace.push(f);
        if (prev - f).abs() <= opts.tol * prev.abs() {
            break;
        }
    }
    LaePoint {
        weights: z.as_slice().to_vec(),
        objective_trace: trace,
    }
}

/// Row `i` holds the LAE reconstruction weights of `xᵢ` on its `s_hat`
/// nearest anchors.
pub fn agr_lae_z(ds: &Dataset, anchors: &AnchorSet, opts: &LaeOptions) -> Result<DMatrix<f64>> {
    anchors.check(ds)?;
    let x = ds.features();
    let d2 = sq_dists(x, &anchors.u);
    let k = anchors.k();
    let rows: Vec<Vec<f64>> = (0..ds.n())
        .into_par_iter()
        .map(|i| {
            let di: Vec<f64> = d2.row(i).iter().copied().collect();
            let nb = nearest(&di, anchors.s_hat);
            let b = anchors.u.select_columns(&nb);
            let fit = lae_point(x.column(i).as_slice(), &b, opts);
            let mut row = vec![0.0; k];
            for (&r, &v) in nb.iter().zip(&fit.weights) {
                row[r] = v;
            }
            row
        })
        .collect();
    Ok(DMatrix::from_fn(ds.n(), k, |i, r| rows[i][r]))
}

/// Euclidean projection onto `{z ≥ 0, Σz = 1}` by Michelot's active-set
/// iteration.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project onto an empty simplex");
    let mut active: Vec<usize> = (0..v.len()).collect();
    let tau = loop {
        let tau = (active.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / active.len() as f64;
        let before = active.len();
        active.retain(|&i| v[i] > tau);
        if active.len() == before {
            break tau;
        }
    };
    v.iter().map(|&a| (a - tau).max(0.0)).collect()
}

/// AGR inference on the anchor graph `ZΛ⁻¹Zᵀ`, with `gamma` in the role of
/// the reduced solver's `λ₂`. Anchors that receive no weight are dropped.
pub fn agr_predict(z: &DMatrix<f64>, labels: &LabelState, gamma: f64) -> Result<Prediction> {
    let used: Vec<usize> = z
        .column_iter()
        .enumerate()
        .filter(|(_, c)| c.sum() > 0.0)
        .map(|(r, _)| r)
        .collect();
    let factor = GraphFactor::anchor(z.select_columns(&used))?;
    agr_closed_form_solve(&factor, labels, &InferConfig::new(gamma, Method::AgrClosedForm))
}
