//! Fixtures and dense reference computations shared by the integration tests.
#![allow(dead_code)]

use hidegl::hdp::SpanningTree;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive row-stochastic n × k matrix.
pub fn random_z(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut z = DMatrix::from_fn(n, k, |_, _| rng.random_range(0.05..1.0));
    for mut row in z.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    z
}

/// Random spanning tree: vertex i attaches to a uniform earlier vertex.
pub fn random_tree(k: usize, rng: &mut ChaCha8Rng) -> SpanningTree {
    let edges = (1..k).map(|i| (rng.random_range(0..i), i)).collect();
    SpanningTree::from_edges(k, edges).unwrap()
}

pub fn adjacency(tree: &SpanningTree) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(tree.k(), tree.k());
    for &(r, s) in tree.edges() {
        g[(r, s)] = 1.0;
        g[(s, r)] = 1.0;
    }
    g
}

pub struct Fixture {
    pub z: DMatrix<f64>,
    pub tree: SpanningTree,
    pub alpha: f64,
    pub eta: f64,
}

/// Twenty fixtures with n ≤ 50, k ≤ 8, covering every (α, η) pair from
/// {0.1, 0.5, 0.9} × {0, 0.1, 1}.
pub fn fixtures() -> Vec<Fixture> {
    let alphas = [0.1, 0.5, 0.9];
    let etas = [0.0, 0.1, 1.0];
    let mut r = rng(20);
    (0..20)
        .map(|i| {
            let n = r.random_range(6..=50);
            let k = r.random_range(1..=8usize).min(n);
            Fixture {
                z: random_z(n, k, &mut r),
                tree: random_tree(k, &mut r),
                alpha: alphas[i % 3],
                eta: etas[(i / 3) % 3],
            }
        })
        .collect()
}

/// Dense `(n+k) × (n+k)` random walk `P = Γ⁻¹Q`, `Q = [[0, Z], [Zᵀ, ηG]]`.
pub fn transition(z: &DMatrix<f64>, g: &DMatrix<f64>, eta: f64) -> DMatrix<f64> {
    let (n, k) = (z.nrows(), z.ncols());
    let q = DMatrix::from_fn(n + k, n + k, |i, j| match (i < n, j < n) {
        (true, true) => 0.0,
        (true, false) => z[(i, j - n)],
        (false, true) => z[(j, i - n)],
        (false, false) => eta * g[(i - n, j - n)],
    });
    let mut p = q.clone();
    for (i, mut row) in p.row_iter_mut().enumerate() {
        let s: f64 = q.row(i).sum();
        row /= s;
    }
    p
}

/// `E = diag(Zᵀ1 + ηG1)` as a vector.
pub fn e_vec(z: &DMatrix<f64>, g: &DMatrix<f64>, eta: f64) -> Vec<f64> {
    (0..z.ncols()).map(|s| z.column(s).sum() + eta * g.row(s).sum()).collect()
}

pub fn laplacian(w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut l = -w.clone();
    for i in 0..w.nrows() {
        l[(i, i)] += w.row(i).sum();
    }
    l
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().full_piv_lu().try_inverse().expect("invertible")
}
