//! Undirected weighted graphs and their algebraic matrices.
//!
//! Node indices are zero-based. Every edge carries a fixed orientation
//! `from → to` which only fixes the signs of the incidence matrix; the
//! Laplacian and all variances of angle differences are orientation-free.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative gap below which neighbouring eigenvalues are treated as one cluster.
pub const CLUSTER_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(from: usize, to: usize, weight: f64) -> Self {
        Edge { from, to, weight }
    }

    /// The same line with its orientation reversed.
    pub fn flipped(self) -> Self {
        Edge {
            from: self.to,
            to: self.from,
            weight: self.weight,
        }
    }

    pub fn touches(&self, node: usize) -> bool {
        self.from == node || self.to == node
    }
}

/// An undirected graph with strictly positive edge weights.
///
/// The edge order is part of the value: line `k` is `edges()[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    node_count: usize,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidSize("a graph needs at least one node".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            if e.from >= node_count || e.to >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "line {k} references node outside 0..{node_count}"
                )));
            }
            if e.from == e.to {
                return Err(Error::InvalidGraph(format!("line {k} is a self-loop")));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "line {k} has non-positive weight {}",
                    e.weight
                )));
            }
            let key = (e.from.min(e.to), e.from.max(e.to));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!(
                    "line {k} duplicates the pair ({}, {})",
                    key.0, key.1
                )));
            }
        }
        Ok(WeightedGraph { node_count, edges })
    }

    /// Complete graph with lines ordered lexicographically over `(i, j)`, `i < j`,
    /// each oriented `i → j`.
    pub fn canonical_complete(n: usize, weight: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("complete graph needs n ≥ 2, got {n}")));
        }
        let mut edges = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                edges.push(Edge::new(i, j, weight));
            }
        }
        WeightedGraph::new(n, edges)
    }

    /// Star graph rooted at node 0; line `k` joins the root to node `k + 1`.
    pub fn canonical_star(n: usize, weight: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("star graph needs n ≥ 2, got {n}")));
        }
        let edges = (1..n).map(|j| Edge::new(0, j, weight)).collect();
        WeightedGraph::new(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.edges.len(), self.edges.iter().map(|e| e.weight))
    }

    /// Same topology and orientation with new weights, in line order.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::Shape(format!(
                "expected {} weights, got {}",
                self.edges.len(),
                weights.len()
            )));
        }
        let edges = self
            .edges
            .iter()
            .zip(weights)
            .map(|(e, &w)| Edge::new(e.from, e.to, w))
            .collect();
        WeightedGraph::new(self.node_count, edges)
    }

    /// Same graph with line `k` reversed.
    pub fn with_flipped_edge(&self, k: usize) -> Self {
        let mut g = self.clone();
        g.edges[k] = g.edges[k].flipped();
        g
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.touches(node)).count()
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.node_count;
        let mut l = DMatrix::zeros(n, n);
        for e in &self.edges {
            l[(e.from, e.to)] -= e.weight;
            l[(e.to, e.from)] -= e.weight;
            l[(e.from, e.from)] += e.weight;
            l[(e.to, e.to)] += e.weight;
        }
        l
    }

    /// `n × m` signed incidence: `+1` at the source of a line, `−1` at its sink.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.node_count, self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            c[(e.from, k)] = 1.0;
            c[(e.to, k)] = -1.0;
        }
        c
    }

    /// Connectivity by breadth-first traversal.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count;
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == n
    }

    /// Second-smallest Laplacian eigenvalue μ₂ (zero for `n = 1`).
    pub fn algebraic_connectivity(&self) -> f64 {
        if self.node_count < 2 {
            return 0.0;
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.laplacian())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev[1]
    }

    /// Spectral connectivity test: μ₂ above a tolerance scaled by the largest eigenvalue.
    pub fn is_spectrally_connected(&self) -> bool {
        if self.node_count < 2 {
            return true;
        }
        let scale = self.laplacian().diagonal().max().max(1.0);
        self.algebraic_connectivity() > 1e-10 * scale
    }
}

/// Eigen-decomposition `S^{-1/2} L S^{-1/2} = U Λ Uᵀ` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub vectors: DMatrix<f64>,
    /// Index ranges of eigenvalues that coincide up to [`CLUSTER_GAP`].
    pub degeneracy_groups: Vec<std::ops::Range<usize>>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }

    /// Columns `1..n` of `U`, i.e. the eigenvectors orthogonal to the zero mode.
    pub fn nonzero_modes(&self) -> DMatrix<f64> {
        let n = self.dim();
        self.vectors.columns(1, n - 1).into_owned()
    }

    /// Replaces the eigenvector basis of one degenerate cluster by `basis · rotation`.
    ///
    /// The result is an equally valid decomposition when `rotation` is orthogonal.
    pub fn rotate_cluster(&self, group: usize, rotation: &DMatrix<f64>) -> Result<Self> {
        let range = self
            .degeneracy_groups
            .get(group)
            .ok_or_else(|| Error::Shape(format!("no degeneracy group {group}")))?
            .clone();
        if rotation.nrows() != range.len() || rotation.ncols() != range.len() {
            return Err(Error::Shape(format!(
                "rotation must be {0}×{0} for group {group}",
                range.len()
            )));
        }
        let mut out = self.clone();
        let block = self.vectors.columns(range.start, range.len()) * rotation;
        out.vectors
            .columns_mut(range.start, range.len())
            .copy_from(&block);
        Ok(out)
    }
}

/// Spectrum of the Laplacian whitened by a positive diagonal scaling `S`
/// (given as its diagonal).
///
/// Eigenvector signs are fixed so that the first component with magnitude
/// above `1e-12` is positive. When `S` is a multiple of the identity, the
/// zero-mode vector is set to exactly `1/√n · 1`.
pub fn whitened_spectrum(l: &DMatrix<f64>, scaling: &DVector<f64>) -> Result<SpectralDecomposition> {
    let n = l.nrows();
    if l.ncols() != n || scaling.len() != n || n == 0 {
        return Err(Error::Shape(format!(
            "Laplacian {}×{} incompatible with scaling of length {}",
            l.nrows(),
            l.ncols(),
            scaling.len()
        )));
    }
    let norm = l.amax().max(f64::MIN_POSITIVE);
    if (l - l.transpose()).amax() > 1e-9 * norm {
        return Err(Error::Shape("Laplacian is not symmetric".into()));
    }
    if let Some(i) = scaling.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Shape(format!("scaling entry {i} is not positive")));
    }

    let inv_sqrt = scaling.map(|s| 1.0 / s.sqrt());
    let mut whitened = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * l[(i, j)] * inv_sqrt[j]);
    // Symmetrize exactly so the eigensolver sees a symmetric input.
    whitened = (&whitened + whitened.transpose()) * 0.5;

    let eig = SymmetricEigen::new(whitened);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(col, &v);
    }

    let s0 = scaling[0];
    let uniform = scaling.iter().all(|&s| (s - s0).abs() <= 1e-14 * s0);
    let top = eigenvalues[n - 1].abs().max(1.0);
    let mut eigenvalues = eigenvalues;
    if uniform && eigenvalues[0].abs() <= 1e-10 * top {
        eigenvalues[0] = 0.0;
        vectors.set_column(0, &DVector::from_element(n, 1.0 / (n as f64).sqrt()));
    }

    let degeneracy_groups = cluster(&eigenvalues);
    Ok(SpectralDecomposition {
        eigenvalues,
        vectors,
        degeneracy_groups,
    })
}

fn cluster(values: &DVector<f64>) -> Vec<std::ops::Range<usize>> {
    let n = values.len();
    let scale = values.amax().max(1.0);
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || values[i] - values[i - 1] > CLUSTER_GAP * scale {
            groups.push(start..i);
            start = i;
        }
    }
    groups
}
