use serde::{Deserialize, Serialize};

use super::DenseSolution;
use crate::affinity::{AffinityMatrix, ConstraintMatrix};
use crate::oracles::density;
use crate::selection::Selection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueEstimate {
    pub selected: Selection,
    /// Estimated clique size `round(v^T M v)`, clamped to `[1, nnz(v)]`.
    pub omega_hat: usize,
    /// `u^T M u / u^T u` of the selection (0 if empty).
    pub density: f64,
}

/// Picks the `omega_hat` largest entries of `v` (lower index wins ties).
///
/// Members that conflict with a larger kept entry are dropped, so the result
/// is always a clique of `c`.
pub fn round_solution(
    sol: &DenseSolution,
    m: &AffinityMatrix,
    c: &ConstraintMatrix,
) -> CliqueEstimate {
    let v = &sol.v;
    let zt = sol.diagnostics.zero_tol;
    let nnz = v.iter().filter(|&&x| x > zt).count();
    let quad = v.dot(&(m.as_matrix() * v));
    let omega_hat = if nnz == 0 {
        0
    } else {
        (quad.round().max(1.0) as usize).min(nnz)
    };

    let mut order: Vec<usize> = (0..v.len()).filter(|&i| v[i] > zt).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::with_capacity(omega_hat);
    for &i in order.iter().take(omega_hat) {
        if kept.iter().all(|&k| !c.is_constrained(i, k)) {
            kept.push(i);
        }
    }
    let selected = Selection::from_indices(kept);
    let density = if selected.is_empty() {
        0.0
    } else {
        density(m, &selected).expect("nonempty selection")
    };
    CliqueEstimate {
        selected,
        omega_hat,
        density,
    }
}
