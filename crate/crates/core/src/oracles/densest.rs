//! Exact densest subgraph via parametric min cut (Goldberg).
//!
//! For a guess `g`, build a network with `s -> v` of capacity `deg_w(v)`,
//! `u <-> v` of capacity `w_uv`, and `v -> t` of capacity `2g`. A source side
//! `{s} ∪ A` has cut value `D - 2 W(A) + 2 g |A|` where `D` is the total
//! weighted degree, so a cut below `D` exists iff some `A` has
//! `W(A) / |A| > g`. Binary search on `g` brackets the optimum.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::affinity::AffinityMatrix;
use crate::selection::Selection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensestSubgraph {
    pub vertices: Selection,
    /// Edge density `W(S) / |S|`, each edge counted once, no self loops.
    pub density: f64,
}

/// `W(S) / |S|` over the off-diagonal weights of `w`.
pub fn edge_density(w: &DMatrix<f64>, s: &[usize]) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let total: f64 = s
        .iter()
        .enumerate()
        .map(|(a, &i)| s[a + 1..].iter().map(|&j| w[(i, j)]).sum::<f64>())
        .sum();
    total / s.len() as f64
}

impl DensestSubgraph {
    /// Converts to the diagonal-inclusive density used for cliques:
    /// `u^T M u / u^T u = 2 W(S)/|S| + mean(M_ii, i in S)`.
    pub fn affinity_density(&self, m: &AffinityMatrix) -> f64 {
        let idx = self.vertices.indices();
        if idx.is_empty() {
            return 0.0;
        }
        let diag: f64 = idx.iter().map(|&i| m.get(i, i)).sum();
        2.0 * self.density + diag / idx.len() as f64
    }
}

/// Densest subgraph of the weighted graph given by the off-diagonal part of
/// the symmetric nonnegative matrix `w` (the diagonal is ignored).
pub fn densest_subgraph_exact(w: &DMatrix<f64>) -> Result<DensestSubgraph, OracleError> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(OracleError::DimensionMismatch {
            expected: n,
            actual: w.ncols(),
        });
    }
    if n == 0 {
        return Err(OracleError::EmptySelection);
    }
    let mut max_w: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let x = w[(i, j)];
            if i != j && (!x.is_finite() || x < 0.0 || x != w[(j, i)]) {
                return Err(OracleError::InvalidWeight { i, j, value: x });
            }
            if i != j {
                max_w = max_w.max(x);
            }
        }
    }

    let all: Vec<usize> = (0..n).collect();
    let mut best = all.clone();
    let mut best_density = edge_density(w, &all);
    if max_w == 0.0 {
        return Ok(DensestSubgraph {
            vertices: Selection::from_indices(best),
            density: best_density,
        });
    }

    let degree: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum())
        .collect();
    let mut lo = best_density;
    let mut hi = degree.iter().copied().fold(0.0, f64::max) / 2.0;
    let stop = 1e-9 * max_w;
    while hi - lo >= stop {
        let g = 0.5 * (lo + hi);
        let side = denser_than(w, &degree, g);
        if side.is_empty() {
            hi = g;
        } else {
            let d = edge_density(w, &side);
            if d > best_density {
                best_density = d;
                best = side;
            }
            // the cut certifies a set strictly denser than g
            lo = g.max(best_density);
        }
    }
    Ok(DensestSubgraph {
        vertices: Selection::from_indices(best),
        density: best_density,
    })
}

/// Source side of a minimum cut for guess `g` (empty when no set beats `g`).
fn denser_than(w: &DMatrix<f64>, degree: &[f64], g: f64) -> Vec<usize> {
    let n = degree.len();
    let (s, t) = (n, n + 1);
    let mut net = FlowNetwork::new(n + 2);
    for v in 0..n {
        if degree[v] > 0.0 {
            net.add_edge(s, v, degree[v], 0.0);
        }
        net.add_edge(v, t, 2.0 * g, 0.0);
        for u in 0..v {
            let x = w[(u, v)];
            if x > 0.0 {
                net.add_edge(u, v, x, x);
            }
        }
    }
    net.max_flow(s, t);
    let reach = net.residual_reachable(s);
    (0..n).filter(|&v| reach[v]).collect()
}

/// Dinic's algorithm on floating-point capacities.
struct FlowNetwork {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    level: Vec<i32>,
    iter: Vec<usize>,
    eps: f64,
}

impl FlowNetwork {
    fn new(n: usize) -> Self {
        Self {
            head: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![0; n],
            iter: vec![0; n],
            eps: 0.0,
        }
    }

    /// Arc `u -> v` with capacity `c` and its reverse with capacity `rc`.
    fn add_edge(&mut self, u: usize, v: usize, c: f64, rc: f64) {
        self.head[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(c);
        self.head[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(rc);
        self.eps = self.eps.max(1e-12 * c.max(rc));
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.fill(-1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > self.eps && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, f: f64) -> f64 {
        if u == t {
            return f;
        }
        while self.iter[u] < self.head[u].len() {
            let e = self.head[u][self.iter[u]];
            let v = self.to[e];
            if self.cap[e] > self.eps && self.level[v] == self.level[u] + 1 {
                let pushed = self.dfs(v, t, f.min(self.cap[e]));
                if pushed > 0.0 {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            self.iter[u] += 1;
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        while self.bfs(s, t) {
            self.iter.fill(0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= self.eps {
                    break;
                }
                flow += f;
            }
        }
        flow
    }

    fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > self.eps && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}
