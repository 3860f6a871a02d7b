use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Undirected spanning tree over `k` vertices, stored as an edge list with
/// `r < s` in every pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanningTree {
    k: usize,
    edges: Vec<(usize, usize)>,
}

impl SpanningTree {
    /// Validates that `edges` form a spanning tree on `k` vertices.
    pub fn from_edges(k: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if k == 0 {
            return Err(invalid("a tree needs at least one vertex"));
        }
        if edges.len() + 1 != k {
            return Err(invalid(format!(
                "{} edges cannot span {k} vertices",
                edges.len()
            )));
        }
        let mut uf = UnionFind::new(k);
        let mut normalized = Vec::with_capacity(edges.len());
        for (r, s) in edges {
            if r >= k || s >= k || r == s {
                return Err(invalid(format!("bad edge ({r}, {s})")));
            }
            if !uf.union(r, s) {
                return Err(invalid(format!("edge ({r}, {s}) closes a cycle")));
            }
            normalized.push((r.min(s), r.max(s)));
        }
        Ok(Self {
            k,
            edges: normalized,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.k];
        for &(r, s) in &self.edges {
            deg[r] += 1;
            deg[s] += 1;
        }
        deg
    }

    /// 0/1 adjacency matrix `G`.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.k, self.k);
        for &(r, s) in &self.edges {
            g[(r, s)] = 1.0;
            g[(s, r)] = 1.0;
        }
        g
    }

    /// `diag(G1) − G`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.adjacency();
        for (v, d) in self.degrees().into_iter().enumerate() {
            l[(v, v)] = d as f64;
        }
        l
    }

    /// Total squared edge length under the vertex positions `c` (d × k).
    pub fn cost(&self, c: &DMatrix<f64>) -> f64 {
        self.edges
            .iter()
            .map(|&(r, s)| (c.column(r) - c.column(s)).norm_squared())
            .sum()
    }
}

/// Minimum spanning tree of the complete graph on the columns of `c`, with
/// squared Euclidean edge costs. Equal costs are resolved in favor of the
/// lexicographically smaller `(r, s)`.
pub fn fit_spanning_tree(c: &DMatrix<f64>) -> SpanningTree {
    let k = c.ncols();
    let mut candidates = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for r in 0..k {
        for s in r + 1..k {
            candidates.push(((c.column(r) - c.column(s)).norm_squared(), r, s));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut uf = UnionFind::new(k);
    let mut edges = Vec::with_capacity(k.saturating_sub(1));
    for (_, r, s) in candidates {
        if uf.union(r, s) {
            edges.push((r, s));
            if edges.len() + 1 == k {
                break;
            }
        }
    }
    SpanningTree { k, edges }
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vertex() {
        let t = fit_spanning_tree(&DMatrix::from_element(2, 1, 3.0));
        assert!(t.edges().is_empty());
        assert_eq!(t.laplacian(), DMatrix::zeros(1, 1));
    }

    #[test]
    fn collinear_points() {
        let c = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 3.0]);
        assert_eq!(fit_spanning_tree(&c).edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn ties_prefer_lexicographically_smaller_edges() {
        // Unit square: four sides of cost 1, diagonals of cost 2.
        let c = DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(fit_spanning_tree(&c).edges(), &[(0, 1), (0, 2), (1, 3)]);
    }

    #[test]
    fn validation() {
        assert!(SpanningTree::from_edges(3, vec![(0, 1), (1, 2)]).is_ok());
        assert!(SpanningTree::from_edges(3, vec![(0, 1)]).is_err());
        assert!(SpanningTree::from_edges(3, vec![(0, 1), (1, 0)]).is_err());
        assert!(SpanningTree::from_edges(3, vec![(0, 3), (1, 2)]).is_err());
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let t = SpanningTree::from_edges(4, vec![(2, 0), (0, 1), (1, 3)]).unwrap();
        let l = t.laplacian();
        for r in 0..4 {
            assert_eq!(l.row(r).sum(), 0.0);
        }
        assert_eq!(l, l.transpose());
        assert_eq!(t.edges()[0], (0, 2));
    }
}
