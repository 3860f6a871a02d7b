//! Lloyd's k-means with k-means++ seeding.
//!
//! Used to initialize the high-dense points and to place AGR anchors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::sq_dists;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub max_iters: usize,
    pub n_restarts: usize,
    pub seed: u64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            n_restarts: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Kmeans {
    /// d × k
    pub centers: DMatrix<f64>,
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub sse: f64,
    pub iterations: usize,
}

/// Clusters the columns of `x` (d × n) into `k` groups, keeping the best of
/// `n_restarts` runs by SSE.
pub fn kmeans(x: &DMatrix<f64>, k: usize, cfg: &KmeansConfig) -> Result<Kmeans> {
    let n = x.ncols();
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if k > n {
        return Err(invalid(format!("k = {k} exceeds the number of samples {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Kmeans> = None;
    for _ in 0..cfg.n_restarts.max(1) {
        let init = plus_plus(x, k, &mut rng);
        let run = lloyd(x, init, cfg.max_iters);
        if best.as_ref().is_none_or(|b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus(x: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = x.ncols();
    let mut chosen = vec![false; n];
    let mut picks = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    picks.push(first);
    chosen[first] = true;
    let mut d2: Vec<f64> = (0..n)
        .map(|i| (x.column(i) - x.column(first)).norm_squared())
        .collect();

    while picks.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive mass")
        } else {
            // Only duplicates of existing centers remain.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[next] = true;
        picks.push(next);
        for (i, w) in d2.iter_mut().enumerate() {
            let d = (x.column(i) - x.column(next)).norm_squared();
            if d < *w {
                *w = d;
            }
        }
        d2[next] = 0.0;
    }
    DMatrix::from_fn(x.nrows(), k, |r, s| x[(r, picks[s])])
}

fn lloyd(x: &DMatrix<f64>, mut centers: DMatrix<f64>, max_iters: usize) -> Kmeans {
    let (d, n, k) = (x.nrows(), x.ncols(), centers.ncols());
    let mut assignment = vec![usize::MAX; n];
    let mut iterations = 0;
    let mut dist = assign(x, &centers, &mut assignment);

    for it in 1..=max_iters {
        iterations = it;
        let mut sums = DMatrix::<f64>::zeros(d, k);
        let mut counts = vec![0usize; k];
        for (i, &a) in assignment.iter().enumerate() {
            let mut col = sums.column_mut(a);
            col += x.column(i);
            counts[a] += 1;
        }
        let mut taken = vec![false; n];
        for (s, &count) in counts.iter().enumerate() {
            if count > 0 {
                centers.set_column(s, &(sums.column(s) / count as f64));
            } else {
                // Re-seed an empty cluster at the point farthest from its center.
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .expect("k <= n leaves a free point");
                taken[far] = true;
                centers.set_column(s, &x.column(far));
            }
        }
        let before = assignment.clone();
        dist = assign(x, &centers, &mut assignment);
        if before == assignment {
            break;
        }
    }
    let sse = dist.iter().sum();
    Kmeans {
        centers,
        assignment,
        sse,
        iterations,
    }
}

/// Nearest-center assignment with lowest-index tie-breaking; returns each
/// point's squared distance to its center.
fn assign(x: &DMatrix<f64>, centers: &DMatrix<f64>, assignment: &mut [usize]) -> Vec<f64> {
    let dists = sq_dists(x, centers);
    let mut out = vec![0.0; x.ncols()];
    for (i, a) in assignment.iter_mut().enumerate() {
        let row = dists.row(i);
        let (best, d) = row
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bd), (s, &v)| if v < bd { (s, v) } else { (bi, bd) });
        *a = best;
        out[i] = d;
    }
    out
}
