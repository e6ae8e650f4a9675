//! Exact small-scale solvers used as ground truth.
//!
//! None of these scale; they exist to check the relaxations and the
//! first-order solver on instances small enough to enumerate.

mod densest;
mod graph;
mod max_clique;

pub use densest::{densest_subgraph_exact, edge_density, DensestSubgraph};
pub use graph::Graph;
pub use max_clique::{max_clique_exact, MaxCliqueOptions, MaxCliqueOutcome};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::{AffinityMatrix, ConstraintMatrix};
use crate::selection::Selection;

/// Largest `m` accepted by [`dewc_bruteforce`].
pub const DEWC_CAP: usize = 20;
/// Largest `m` accepted by [`msrc_bruteforce`].
pub const MSRC_CAP: usize = 25;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("selection is empty")]
    EmptySelection,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("problem size {size} exceeds the enumeration cap {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid edge weight {value} at ({i}, {j})")]
    InvalidWeight { i: usize, j: usize, value: f64 },
}

/// `u^T M u / u^T u` for the indicator `u` of `sel`, diagonal included.
pub fn density(m: &AffinityMatrix, sel: &Selection) -> Result<f64, OracleError> {
    if sel.is_empty() {
        return Err(OracleError::EmptySelection);
    }
    if sel.bound() > m.dim() {
        return Err(OracleError::IndexOutOfRange {
            index: sel.bound() - 1,
            dim: m.dim(),
        });
    }
    let idx = sel.indices();
    let total: f64 = idx
        .iter()
        .map(|&i| idx.iter().map(|&j| m.get(i, j)).sum::<f64>())
        .sum();
    Ok(total / idx.len() as f64)
}

/// Maximum-density clique with its density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DewcOptimum {
    pub selection: Selection,
    pub density: f64,
}

/// Maximum spectral radius clique.
#[derive(Debug, Clone, PartialEq)]
pub struct MsrcOptimum {
    pub clique: Selection,
    /// `lambda_1(M_S)`.
    pub value: f64,
    /// Perron vector of `M_S` embedded in `R^m`, unit norm, nonnegative.
    pub v: DVector<f64>,
}

fn check_dims(m: &AffinityMatrix, c: &ConstraintMatrix, cap: usize) -> Result<usize, OracleError> {
    let n = m.dim();
    if c.dim() != n {
        return Err(OracleError::DimensionMismatch {
            expected: n,
            actual: c.dim(),
        });
    }
    let cap = cap.min(64);
    if n > cap {
        return Err(OracleError::CapExceeded { size: n, cap });
    }
    Ok(n)
}

/// Relative slack used when comparing objective values for ties.
fn tie_tol(best: f64) -> f64 {
    1e-12 * best.abs().max(1.0)
}

/// Is `(value, sel)` strictly preferable to `(best_value, best)`?
/// Higher value first, then larger cardinality, then lexicographically smaller.
fn preferable(value: f64, sel: &[usize], best_value: f64, best: &[usize]) -> bool {
    let tol = tie_tol(best_value);
    if value > best_value + tol {
        return true;
    }
    if value < best_value - tol {
        return false;
    }
    sel.len() > best.len() || (sel.len() == best.len() && sel < best)
}

/// Densest edge-weighted clique by exhaustive clique enumeration.
pub fn dewc_bruteforce(m: &AffinityMatrix, c: &ConstraintMatrix) -> Result<DewcOptimum, OracleError> {
    dewc_bruteforce_with_cap(m, c, DEWC_CAP)
}

pub fn dewc_bruteforce_with_cap(
    m: &AffinityMatrix,
    c: &ConstraintMatrix,
    cap: usize,
) -> Result<DewcOptimum, OracleError> {
    let n = check_dims(m, c, cap)?;
    if n == 0 {
        return Err(OracleError::EmptySelection);
    }
    let g = Graph::from_constraints(c);
    let adj: Vec<u64> = (0..n).map(|i| g.neighbor_mask(i)).collect();

    struct Search<'a> {
        m: &'a AffinityMatrix,
        adj: Vec<u64>,
        clique: Vec<usize>,
        best: Vec<usize>,
        best_density: f64,
    }

    impl Search<'_> {
        fn extend(&mut self, sum: f64, cand: u64) {
            let mut rest = cand;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let gain = self.m.get(i, i)
                    + 2.0 * self.clique.iter().map(|&j| self.m.get(i, j)).sum::<f64>();
                let total = sum + gain;
                self.clique.push(i);
                let d = total / self.clique.len() as f64;
                if preferable(d, &self.clique, self.best_density, &self.best) {
                    self.best.clone_from(&self.clique);
                    self.best_density = d;
                }
                // only extend with higher indices so each clique is visited once
                self.extend(total, cand & self.adj[i] & above(i));
                self.clique.pop();
            }
        }
    }

    let mut s = Search {
        m,
        adj,
        clique: Vec::with_capacity(n),
        best: Vec::new(),
        best_density: f64::NEG_INFINITY,
    };
    s.extend(0.0, full_mask(n));
    Ok(DewcOptimum {
        selection: Selection::from_indices(s.best),
        density: s.best_density,
    })
}

#[inline]
fn full_mask(n: usize) -> u64 {
    if n == 64 {
        !0
    } else {
        (1u64 << n) - 1
    }
}

#[inline]
fn above(i: usize) -> u64 {
    if i >= 63 {
        0
    } else {
        !0u64 << (i + 1)
    }
}

/// Every maximal clique of `g` (at most 64 vertices), via Bron–Kerbosch
/// with Tomita pivoting. Cliques are returned with sorted vertices.
pub fn maximal_cliques(g: &Graph) -> Result<Vec<Vec<usize>>, OracleError> {
    let n = g.vertex_count();
    if n > 64 {
        return Err(OracleError::CapExceeded { size: n, cap: 64 });
    }
    let adj: Vec<u64> = (0..n).map(|i| g.neighbor_mask(i)).collect();
    let mut out = Vec::new();
    let mut r = Vec::new();
    bron_kerbosch(&adj, &mut r, full_mask(n), 0, &mut out);
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort();
    Ok(out)
}

fn bron_kerbosch(adj: &[u64], r: &mut Vec<usize>, p: u64, x: u64, out: &mut Vec<Vec<usize>>) {
    if p == 0 {
        if x == 0 {
            out.push(r.clone());
        }
        return;
    }
    // pivot maximizing |P ∩ N(u)| over u in P ∪ X
    let mut pivot = 0;
    let mut best = -1i64;
    let mut ux = p | x;
    while ux != 0 {
        let u = ux.trailing_zeros() as usize;
        ux &= ux - 1;
        let k = (p & adj[u]).count_ones() as i64;
        if k > best {
            best = k;
            pivot = u;
        }
    }
    let mut p = p;
    let mut x = x;
    let mut cand = p & !adj[pivot];
    while cand != 0 {
        let v = cand.trailing_zeros() as usize;
        cand &= cand - 1;
        r.push(v);
        bron_kerbosch(adj, r, p & adj[v], x & adj[v], out);
        r.pop();
        p &= !(1 << v);
        x |= 1 << v;
    }
}

/// Perron eigenpair of a small dense symmetric nonnegative matrix.
pub(crate) fn perron_dense(a: DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = a.symmetric_eigen();
    let (k, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty matrix");
    let mut v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
    if v.sum() < 0.0 {
        v = -v;
    }
    v.apply(|x| *x = x.max(0.0));
    let norm = v.norm();
    if norm > 0.0 {
        v /= norm;
    }
    (value, v)
}

/// Maximum spectral radius clique: the maximal clique of the compatibility
/// graph whose principal submatrix has the largest Perron root.
///
/// Restricting to maximal cliques is exact because the Perron root of a
/// nonnegative matrix never decreases when a principal submatrix grows.
pub fn msrc_bruteforce(m: &AffinityMatrix, c: &ConstraintMatrix) -> Result<MsrcOptimum, OracleError> {
    msrc_bruteforce_with_cap(m, c, MSRC_CAP)
}

pub fn msrc_bruteforce_with_cap(
    m: &AffinityMatrix,
    c: &ConstraintMatrix,
    cap: usize,
) -> Result<MsrcOptimum, OracleError> {
    let n = check_dims(m, c, cap)?;
    if n == 0 {
        return Err(OracleError::EmptySelection);
    }
    let g = Graph::from_constraints(c);
    let mut best: Option<(f64, Vec<usize>, DVector<f64>)> = None;
    for clique in maximal_cliques(&g)? {
        let (value, local) = perron_dense(m.submatrix(&clique));
        let better = match &best {
            None => true,
            Some((bv, bs, _)) => preferable(value, &clique, *bv, bs),
        };
        if better {
            best = Some((value, clique, local));
        }
    }
    let (value, clique, local) = best.expect("a nonempty graph has a maximal clique");
    let mut v = DVector::zeros(n);
    for (a, &i) in clique.iter().enumerate() {
        v[i] = local[a];
    }
    Ok(MsrcOptimum {
        clique: Selection::from_indices(clique),
        value,
        v,
    })
}

#[cfg(test)]
mod tests;
