//! Homotopy projected gradient ascent for the maximum spectral radius clique.
//!
//! The clique constraints are folded into the objective as a penalty,
//! `F_d(v) = v^T (M - d C) v`, maximized over the nonnegative part of the unit
//! sphere. Starting from the Perron vector of `M` (the `d = 0` optimum), each
//! outer iteration runs projected gradient ascent at fixed `d` and then raises
//! `d` by the mean of the per-entry values that would zero the gradient of the
//! violating entries. The loop ends when the support of `v` is a clique.

mod eigen;
mod rounding;

pub use eigen::{
    power_iteration, principal_eigenvector, EigenError, Eigenpair, PowerIterationOutcome,
    PowerIterationParams,
};
pub use rounding::{round_solution, CliqueEstimate};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::{AffinityMatrix, ConstraintMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid solver parameter: {0}")]
    InvalidParams(&'static str),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("cannot project a vector with no positive entry onto the nonnegative sphere")]
    NoPositiveEntry,
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Inner loop stops once an accepted step moves `v` by at most this much.
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    /// Entries at or below this are treated as zero.
    pub zero_tol: f64,
    /// Backtracking factor applied to the step size.
    pub line_search_shrink: f64,
    /// Backtracking gives up below this step size.
    pub min_step: f64,
    /// Keep a per-step objective trace in the diagnostics.
    pub record_trace: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            inner_tol: 1e-9,
            max_inner_iters: 1000,
            max_outer_iters: 100,
            zero_tol: 1e-9,
            line_search_shrink: 0.5,
            min_step: 1e-9,
            record_trace: false,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.inner_tol) {
            return Err(SolverError::InvalidParams("inner_tol must be positive"));
        }
        if !pos(self.zero_tol) {
            return Err(SolverError::InvalidParams("zero_tol must be positive"));
        }
        if !pos(self.min_step) || self.min_step > 1.0 {
            return Err(SolverError::InvalidParams("min_step must be in (0, 1]"));
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(SolverError::InvalidParams(
                "line_search_shrink must be in (0, 1)",
            ));
        }
        if self.max_inner_iters == 0 || self.max_outer_iters == 0 {
            return Err(SolverError::InvalidParams("iteration caps must be positive"));
        }
        Ok(())
    }
}

/// One accepted ascent step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub outer: usize,
    pub penalty: f64,
    pub objective: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    /// Final penalty `d`.
    pub penalty: f64,
    /// `F_d(v)` at the final `d`.
    pub objective: f64,
    /// `v^T M v`.
    pub rayleigh: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Inner loops that stopped on `max_inner_iters` rather than converging.
    pub inner_cap_hits: usize,
    /// True when the homotopy reached a clique support on its own.
    pub constraints_satisfied: bool,
    /// True when `max_outer_iters` ran out and violating entries were zeroed.
    pub repaired: bool,
    pub initial_eigen_converged: bool,
    pub zero_tol: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceStep>,
}

/// Solver output: a point on the nonnegative unit sphere plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution {
    pub v: DVector<f64>,
    pub diagnostics: SolverDiagnostics,
}

impl DenseSolution {
    /// Indices with `v_i > zero_tol`.
    pub fn support(&self) -> Vec<usize> {
        let zt = self.diagnostics.zero_tol;
        self.v
            .iter()
            .enumerate()
            .filter_map(|(i, &x)| (x > zt).then_some(i))
            .collect()
    }

    pub fn diagnostics_json(&self) -> String {
        serde_json::to_string(&self.diagnostics).expect("diagnostics are always serializable")
    }
}

/// `grad F_d = 2 (M v - d C v)`.
pub fn gradient(
    m: &AffinityMatrix,
    c: &ConstraintMatrix,
    d: f64,
    v: &DVector<f64>,
) -> DVector<f64> {
    let mut g = m.as_matrix() * v;
    g.gemv(-d, c.as_matrix(), v, 1.0);
    g * 2.0
}

/// `F_d(v) = v^T (M - d C) v`.
pub fn penalized_objective(
    m: &AffinityMatrix,
    c: &ConstraintMatrix,
    d: f64,
    v: &DVector<f64>,
) -> f64 {
    v.dot(&(m.as_matrix() * v)) - d * v.dot(&(c.as_matrix() * v))
}

/// Euclidean projection onto the nonnegative part of the unit sphere:
/// negative entries are clamped to zero and the result is normalized.
pub fn project(v: &DVector<f64>) -> Result<DVector<f64>, SolverError> {
    let mut out = v.map(|x| x.max(0.0));
    let norm = out.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(SolverError::NoPositiveEntry);
    }
    out /= norm;
    Ok(out)
}

/// Mean of `(Mv)_i / (Cv)_i` over entries with `(Cv)_i > 0` and `v_i > zero_tol`,
/// i.e. the average penalty that would zero each violating gradient entry.
/// Zero when no entry violates.
pub fn penalty_increment(
    m: &AffinityMatrix,
    c: &ConstraintMatrix,
    v: &DVector<f64>,
    zero_tol: f64,
) -> f64 {
    let mv = m.as_matrix() * v;
    let cv = c.as_matrix() * v;
    increment_from_products(&mv, &cv, v, zero_tol)
}

fn increment_from_products(
    mv: &DVector<f64>,
    cv: &DVector<f64>,
    v: &DVector<f64>,
    zero_tol: f64,
) -> f64 {
    let (sum, count) = (0..v.len())
        .filter(|&i| cv[i] > 0.0 && v[i] > zero_tol)
        .fold((0.0, 0usize), |(s, n), i| (s + mv[i] / cv[i], n + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// True when no constrained pair has both entries above `zero_tol`.
pub fn satisfies_constraints(c: &ConstraintMatrix, v: &DVector<f64>, zero_tol: f64) -> bool {
    let support: Vec<usize> = v
        .iter()
        .enumerate()
        .filter_map(|(i, &x)| (x > zero_tol).then_some(i))
        .collect();
    c.is_clique(&support)
}

/// Runs the full homotopy: Perron initialization (or `initial`), penalty
/// schedule, and projected gradient ascent with backtracking at each `d`.
pub fn solve_msrc(
    m: &AffinityMatrix,
    c: &ConstraintMatrix,
    params: &SolverParams,
    initial: Option<&DVector<f64>>,
) -> Result<DenseSolution, SolverError> {
    params.validate()?;
    let n = m.dim();
    if c.dim() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            actual: c.dim(),
        });
    }
    let zt = params.zero_tol;

    let (mut v, initial_eigen_converged) = match initial {
        Some(v0) => {
            if v0.len() != n {
                return Err(SolverError::DimensionMismatch {
                    expected: n,
                    actual: v0.len(),
                });
            }
            (project(v0)?, true)
        }
        None => {
            let out = power_iteration(m.as_matrix(), &PowerIterationParams::default())?;
            if !out.converged {
                log::warn!(
                    "initial eigenvector not converged (residual {:e}); continuing from last iterate",
                    out.relative_residual
                );
            }
            (project(&out.pair.vector)?, out.converged)
        }
    };

    let mut d = penalty_increment(m, c, &v, zt);
    let mut diag = SolverDiagnostics {
        penalty: d,
        objective: 0.0,
        rayleigh: 0.0,
        outer_iters: 0,
        inner_iters: 0,
        inner_cap_hits: 0,
        constraints_satisfied: false,
        repaired: false,
        initial_eigen_converged,
        zero_tol: zt,
        trace: Vec::new(),
    };

    let mut md = DMatrix::zeros(n, n);
    let mut mdv = DVector::zeros(n);
    let mut cand = DVector::zeros(n);
    let mut mdv_cand = DVector::zeros(n);

    loop {
        if satisfies_constraints(c, &v, zt) {
            diag.constraints_satisfied = true;
            break;
        }
        if diag.outer_iters == params.max_outer_iters {
            break;
        }
        diag.outer_iters += 1;

        md.zip_zip_apply(m.as_matrix(), c.as_matrix(), |x, mij, cij| *x = mij - d * cij);
        mdv.gemv(1.0, &md, &v, 0.0);
        let mut f = v.dot(&mdv);

        let mut converged = false;
        for _ in 0..params.max_inner_iters {
            diag.inner_iters += 1;
            // backtracking on the projected step, alpha starting at 1
            let mut alpha = 1.0;
            let mut accepted = None;
            while alpha >= params.min_step {
                cand.copy_from(&v);
                cand.axpy(2.0 * alpha, &mdv, 1.0);
                if project_in_place(&mut cand) {
                    mdv_cand.gemv(1.0, &md, &cand, 0.0);
                    let f_cand = cand.dot(&mdv_cand);
                    if f_cand > f {
                        accepted = Some(f_cand);
                        break;
                    }
                }
                alpha *= params.line_search_shrink;
            }
            let Some(f_new) = accepted else {
                // no ascent direction left at this penalty
                converged = true;
                break;
            };
            let step = (&cand - &v).norm();
            std::mem::swap(&mut v, &mut cand);
            std::mem::swap(&mut mdv, &mut mdv_cand);
            f = f_new;
            if params.record_trace {
                diag.trace.push(TraceStep {
                    outer: diag.outer_iters,
                    penalty: d,
                    objective: f,
                    step_size: alpha,
                });
            }
            if step <= params.inner_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            diag.inner_cap_hits += 1;
        }

        d += penalty_increment(m, c, &v, zt);
    }

    if !diag.constraints_satisfied {
        log::warn!(
            "penalty homotopy hit max_outer_iters={} without a clique support; zeroing violators",
            params.max_outer_iters
        );
        repair_support(c, &mut v, zt);
        v = project(&v)?;
        diag.repaired = true;
    }

    diag.penalty = d;
    diag.objective = penalized_objective(m, c, d, &v);
    diag.rayleigh = v.dot(&(m.as_matrix() * &v));
    Ok(DenseSolution {
        v,
        diagnostics: diag,
    })
}

/// Projection in place; false when nothing positive remains.
fn project_in_place(v: &mut DVector<f64>) -> bool {
    v.apply(|x| *x = x.max(0.0));
    let norm = v.norm();
    if norm > 0.0 && norm.is_finite() {
        *v /= norm;
        true
    } else {
        false
    }
}

/// Walks entries from largest to smallest, zeroing any that conflict with an
/// already kept entry.
fn repair_support(c: &ConstraintMatrix, v: &mut DVector<f64>, zero_tol: f64) {
    let mut order: Vec<usize> = (0..v.len()).filter(|&i| v[i] > zero_tol).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::with_capacity(order.len());
    for i in order {
        if kept.iter().all(|&k| !c.is_constrained(i, k)) {
            kept.push(i);
        } else {
            v[i] = 0.0;
        }
    }
    for x in v.iter_mut() {
        if *x <= zero_tol {
            *x = 0.0;
        }
    }
}
