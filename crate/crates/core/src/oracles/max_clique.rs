//! Exact maximum clique by branch and bound with a greedy-coloring bound.
//!
//! A first pass finds the clique number. A second pass builds the
//! lexicographically smallest maximum clique vertex by vertex, asking the
//! same bounded search whether a clique of the remaining size still exists.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::graph::{BitSet, Graph};
use super::OracleError;
use crate::selection::Selection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxCliqueOptions {
    pub vertex_cap: usize,
    pub timeout: Option<Duration>,
}

impl Default for MaxCliqueOptions {
    fn default() -> Self {
        Self {
            vertex_cap: 2000,
            timeout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxCliqueOutcome {
    pub clique: Selection,
    /// False when the timeout fired; `clique` is then the best found so far.
    pub optimal: bool,
    pub nodes: u64,
}

struct Search<'a> {
    g: &'a Graph,
    deadline: Option<Instant>,
    nodes: u64,
    timed_out: bool,
    best: Vec<usize>,
    /// Decision mode: stop as soon as a clique of this size is found.
    target: Option<usize>,
}

impl Search<'_> {
    fn out_of_time(&mut self) -> bool {
        if self.timed_out {
            return true;
        }
        if self.nodes.is_multiple_of(1024) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                }
            }
        }
        self.timed_out
    }

    fn done(&self) -> bool {
        self.timed_out || self.target.is_some_and(|t| self.best.len() >= t)
    }

    /// Size that a branch has to beat (optimization) or reach (decision).
    fn bar(&self) -> usize {
        match self.target {
            Some(t) => t - 1,
            None => self.best.len(),
        }
    }

    fn expand(&mut self, r: &mut Vec<usize>, mut p: BitSet) {
        self.nodes += 1;
        if self.out_of_time() {
            return;
        }
        let (order, colors) = color_sort(self.g, &p);
        for k in (0..order.len()).rev() {
            if r.len() + colors[k] <= self.bar() {
                return;
            }
            let v = order[k];
            r.push(v);
            let np = p.intersection(self.g.neighbors(v));
            if self.target.is_some_and(|t| r.len() >= t) {
                self.best.clone_from(r);
                r.pop();
                return;
            }
            if np.is_empty() {
                if r.len() > self.best.len() {
                    self.best.clone_from(r);
                }
            } else {
                self.expand(r, np);
            }
            r.pop();
            if self.done() {
                return;
            }
            p.remove(v);
        }
    }
}

/// Greedy sequential coloring of `p`; returns vertices ordered by color and
/// the color (1-based) of each, so `colors[k]` bounds any clique in
/// `order[..=k]`.
fn color_sort(g: &Graph, p: &BitSet) -> (Vec<usize>, Vec<usize>) {
    let mut order = Vec::with_capacity(p.count());
    let mut colors = Vec::with_capacity(order.capacity());
    let mut uncolored = p.clone();
    let mut color = 0;
    while !uncolored.is_empty() {
        color += 1;
        let mut q = uncolored.clone();
        while let Some(v) = q.first() {
            q.remove(v);
            q.difference_with(g.neighbors(v));
            uncolored.remove(v);
            order.push(v);
            colors.push(color);
        }
    }
    (order, colors)
}

/// Maximum-cardinality clique; the lexicographically smallest one on ties.
pub fn max_clique_exact(
    g: &Graph,
    opts: &MaxCliqueOptions,
) -> Result<MaxCliqueOutcome, OracleError> {
    let n = g.vertex_count();
    if n > opts.vertex_cap {
        return Err(OracleError::CapExceeded {
            size: n,
            cap: opts.vertex_cap,
        });
    }
    if n == 0 {
        return Ok(MaxCliqueOutcome {
            clique: Selection::empty(),
            optimal: true,
            nodes: 0,
        });
    }
    let mut s = Search {
        g,
        deadline: opts.timeout.map(|t| Instant::now() + t),
        nodes: 0,
        timed_out: false,
        best: Vec::new(),
        target: None,
    };
    s.expand(&mut Vec::new(), BitSet::full(n));
    if s.timed_out {
        return Ok(MaxCliqueOutcome {
            clique: Selection::from_indices(s.best),
            optimal: false,
            nodes: s.nodes,
        });
    }
    let omega = s.best.len();
    let fallback = std::mem::take(&mut s.best);

    // lexicographic extraction
    let mut chosen = Vec::with_capacity(omega);
    let mut cand = BitSet::full(n);
    for v in 0..n {
        if chosen.len() == omega {
            break;
        }
        if !cand.contains(v) {
            continue;
        }
        let mut next = cand.intersection(g.neighbors(v));
        next.retain_above(v);
        let need = omega - chosen.len() - 1;
        let feasible = need == 0 || {
            s.target = Some(need);
            s.best.clear();
            s.expand(&mut Vec::new(), next.clone());
            s.best.len() >= need
        };
        if s.timed_out {
            return Ok(MaxCliqueOutcome {
                clique: Selection::from_indices(fallback),
                optimal: true,
                nodes: s.nodes,
            });
        }
        if feasible {
            chosen.push(v);
            cand = next;
        } else {
            cand.remove(v);
        }
    }
    debug_assert_eq!(chosen.len(), omega);
    Ok(MaxCliqueOutcome {
        clique: Selection::from_indices(chosen),
        optimal: true,
        nodes: s.nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_omega(g: &Graph) -> (usize, Vec<usize>) {
        let n = g.vertex_count();
        let mut best: Vec<usize> = Vec::new();
        for mask in 1u32..(1 << n) {
            let s: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            if g.is_clique(&s) && (s.len() > best.len() || (s.len() == best.len() && s < best)) {
                best = s;
            }
        }
        (best.len(), best)
    }

    #[test]
    fn complete_graph() {
        let n = 9;
        let g = Graph::from_edges(n, (0..n).flat_map(|j| (0..j).map(move |i| (i, j))));
        let out = max_clique_exact(&g, &MaxCliqueOptions::default()).unwrap();
        assert_eq!(out.clique, Selection::all(n));
        assert!(out.optimal);
    }

    #[test]
    fn empty_graph_picks_vertex_zero() {
        let g = Graph::new(4);
        let out = max_clique_exact(&g, &MaxCliqueOptions::default()).unwrap();
        assert_eq!(out.clique.indices(), &[0]);
    }

    #[test]
    fn competing_triangles_are_indistinguishable() {
        // u1..u5 -> 0..4; triangles {0,1,3} and {0,2,4}
        let g = Graph::from_edges(5, [(0, 1), (0, 3), (1, 3), (0, 2), (0, 4), (2, 4)]);
        let out = max_clique_exact(&g, &MaxCliqueOptions::default()).unwrap();
        assert_eq!(out.clique.len(), 3);
        assert!(g.is_clique(out.clique.indices()));
        // ties resolved lexicographically
        assert_eq!(out.clique.indices(), &[0, 1, 3]);
    }

    #[test]
    fn erdos_renyi_matches_subset_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..40 {
            let p = [0.3, 0.5, 0.7][trial % 3];
            let n = 15;
            let mut g = Graph::new(n);
            for j in 0..n {
                for i in 0..j {
                    if rng.random::<f64>() < p {
                        g.add_edge(i, j);
                    }
                }
            }
            let out = max_clique_exact(&g, &MaxCliqueOptions::default()).unwrap();
            let (omega, lex) = brute_force_omega(&g);
            assert_eq!(out.clique.len(), omega);
            assert_eq!(out.clique.indices(), lex.as_slice());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let g = Graph::new(10);
        let opts = MaxCliqueOptions {
            vertex_cap: 5,
            timeout: None,
        };
        assert!(matches!(
            max_clique_exact(&g, &opts),
            Err(OracleError::CapExceeded { size: 10, cap: 5 })
        ));
    }

    #[test]
    fn timeout_reports_best_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 300;
        let mut g = Graph::new(n);
        for j in 0..n {
            for i in 0..j {
                if rng.random::<f64>() < 0.9 {
                    g.add_edge(i, j);
                }
            }
        }
        let opts = MaxCliqueOptions {
            vertex_cap: 2000,
            timeout: Some(Duration::from_millis(1)),
        };
        let out = max_clique_exact(&g, &opts).unwrap();
        assert!(!out.optimal);
        assert!(g.is_clique(out.clique.indices()));
    }
}
