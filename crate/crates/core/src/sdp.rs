//! Lifted convex relaxation of the maximum spectral radius clique.
//!
//! With `X = v v^T` and the rank constraint dropped, the problem becomes
//!
//! ```text
//! max Tr(M X)  s.t.  X_ij = 0 where C_ij = 1,  X >= 0 elementwise,  X ⪰ 0,  Tr(X) <= 1
//! ```
//!
//! solved here by two-block ADMM: `X` lives in the polyhedral set (zero
//! pattern, nonnegativity, trace bound) and `Z` in the PSD cone, with the
//! consensus `X = Z`. When the optimum has rank one its principal eigenvector
//! is the global MSRC solution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::{AffinityMatrix, ConstraintMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum SdpError {
    #[error("invalid SDP parameter: {0}")]
    InvalidParams(&'static str),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("problem size {size} exceeds the cap of {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error(
        "ADMM did not converge in {iterations} iterations \
         (primal residual {primal_residual:e}, dual residual {dual_residual:e})"
    )]
    NotConverged {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
    },
    #[error("solution is not rank one (lambda2 / lambda1 = {ratio:e})")]
    NotRankOne { ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpParams {
    /// Stop once both residuals are at or below this.
    pub tol: f64,
    /// The consensus gap `||X - Z||_F` must also reach this, so the returned
    /// `X` is PSD to within the same margin.
    pub feasibility_tol: f64,
    pub max_iters: usize,
    /// Initial augmented Lagrangian penalty.
    pub rho: f64,
    /// Residual balancing period; 0 keeps `rho` fixed.
    pub balance_every: usize,
    pub size_cap: usize,
}

impl Default for SdpParams {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            feasibility_tol: 1e-8,
            max_iters: 50_000,
            rho: 1.0,
            balance_every: 50,
            size_cap: 200,
        }
    }
}

impl SdpParams {
    pub fn validate(&self) -> Result<(), SdpError> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.tol) || !pos(self.feasibility_tol) {
            return Err(SdpError::InvalidParams("tolerances must be positive"));
        }
        if !pos(self.rho) {
            return Err(SdpError::InvalidParams("rho must be positive"));
        }
        if self.max_iters == 0 {
            return Err(SdpError::InvalidParams("max_iters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// Symmetric, zero on the constraint pattern, elementwise nonnegative,
    /// trace at most one; PSD to within `feasibility_tol`.
    pub x: DMatrix<f64>,
    /// `Tr(M X)`.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// Final penalty after residual balancing.
    pub rho: f64,
}

/// JSON-friendly summary of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpReport {
    pub dim: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub eigen_ratio: f64,
    pub rank_one: bool,
}

impl SdpSolution {
    pub fn report(&self, ratio_tol: f64) -> SdpReport {
        let ratio = eigen_ratio(&self.x);
        SdpReport {
            dim: self.x.nrows(),
            objective: self.objective,
            primal_residual: self.primal_residual,
            dual_residual: self.dual_residual,
            iterations: self.iterations,
            eigen_ratio: ratio,
            rank_one: ratio <= ratio_tol,
        }
    }
}

/// Default rank test threshold on `lambda2 / lambda1`.
pub const RANK_RATIO_TOL: f64 = 1e-3;

/// Solves the relaxation with default parameters apart from `tol` and `max_iters`.
pub fn solve_msrc_sdr(
    m: &AffinityMatrix,
    c: &ConstraintMatrix,
    tol: f64,
    max_iters: usize,
) -> Result<SdpSolution, SdpError> {
    let params = SdpParams {
        tol,
        max_iters,
        ..SdpParams::default()
    };
    solve_msrc_sdr_with(m, c, &params)
}

pub fn solve_msrc_sdr_with(
    m: &AffinityMatrix,
    c: &ConstraintMatrix,
    params: &SdpParams,
) -> Result<SdpSolution, SdpError> {
    params.validate()?;
    let n = m.dim();
    if c.dim() != n {
        return Err(SdpError::DimensionMismatch {
            expected: n,
            actual: c.dim(),
        });
    }
    if n > params.size_cap {
        return Err(SdpError::CapExceeded {
            size: n,
            cap: params.size_cap,
        });
    }
    let mm = m.as_matrix();
    let pattern = c.as_matrix();

    let mut rho = params.rho;
    let mut z = DMatrix::identity(n, n) / n as f64;
    let mut x = z.clone();
    // scaled dual variable
    let mut u = DMatrix::<f64>::zeros(n, n);
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;

    for it in 1..=params.max_iters {
        // X = Proj_A(Z - U + M / rho)
        x.copy_from(&z);
        x -= &u;
        x += mm / rho;
        project_polyhedral(&mut x, pattern);

        let z_prev = std::mem::replace(&mut z, &x + &u);
        project_psd(&mut z);

        u += &x;
        u -= &z;

        primal = (&x - &z).norm();
        dual = rho * (&z - &z_prev).norm();
        if primal <= params.tol.min(params.feasibility_tol) && dual <= params.tol {
            return Ok(finish(mm, x, primal, dual, it, rho));
        }

        if params.balance_every > 0 && it % params.balance_every == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u /= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }
    Err(SdpError::NotConverged {
        iterations: params.max_iters,
        primal_residual: primal,
        dual_residual: dual,
    })
}

fn finish(
    m: &DMatrix<f64>,
    x: DMatrix<f64>,
    primal: f64,
    dual: f64,
    iterations: usize,
    rho: f64,
) -> SdpSolution {
    let objective = m.component_mul(&x).sum();
    SdpSolution {
        x,
        objective,
        primal_residual: primal,
        dual_residual: dual,
        iterations,
        rho,
    }
}

/// Frobenius projection onto `{X sym : X_ij = 0 on the pattern, X_ij >= 0, Tr X <= 1}`.
/// The set is a product over entries except for the diagonal, which lands on
/// the capped simplex `{x >= 0, sum x <= 1}`.
fn project_polyhedral(x: &mut DMatrix<f64>, pattern: &DMatrix<f64>) {
    let n = x.nrows();
    for j in 0..n {
        for i in 0..j {
            let val = if pattern[(i, j)] != 0.0 {
                0.0
            } else {
                (0.5 * (x[(i, j)] + x[(j, i)])).max(0.0)
            };
            x[(i, j)] = val;
            x[(j, i)] = val;
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| x[(i, i)]).collect();
    project_capped_simplex(&mut d);
    for (i, v) in d.into_iter().enumerate() {
        x[(i, i)] = v;
    }
}

/// Projection onto `{x >= 0, sum x <= 1}`.
fn project_capped_simplex(x: &mut [f64]) {
    let clamped_sum: f64 = x.iter().map(|v| v.max(0.0)).sum();
    if clamped_sum <= 1.0 {
        x.iter_mut().for_each(|v| *v = v.max(0.0));
        return;
    }
    // the trace bound is active: project onto the unit simplex
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

/// Clips negative eigenvalues.
fn project_psd(z: &mut DMatrix<f64>) {
    let eig = SymmetricEigen::new(z.clone());
    z.fill(0.0);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let q = eig.eigenvectors.column(k);
            z.ger(lam, &q, &q, 1.0);
        }
    }
    z.fill_upper_triangle_with_lower_triangle();
}

/// Eigenvalues of a symmetric matrix, largest first.
fn sorted_eigen(x: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(x.clone());
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(x.nrows(), x.nrows(), |i, k| eig.eigenvectors[(i, order[k])]);
    (values, vectors)
}

/// `lambda2 / lambda1` of a symmetric matrix; infinite when `lambda1 <= 0`
/// and zero for 1x1 input with a positive entry.
pub fn eigen_ratio(x: &DMatrix<f64>) -> f64 {
    let (values, _) = sorted_eigen(x);
    match values.as_slice() {
        [] => f64::INFINITY,
        [l1, ..] if *l1 <= 0.0 => f64::INFINITY,
        [_] => 0.0,
        [l1, l2, ..] => l2.max(0.0) / l1,
    }
}

/// True when `lambda2 / lambda1 <= ratio_tol`.
pub fn check_rank1(x: &DMatrix<f64>, ratio_tol: f64) -> bool {
    eigen_ratio(x) <= ratio_tol
}

/// Principal eigenvector of a rank-one `X`, oriented to have nonnegative
/// sum, clamped at zero, and normalized.
pub fn extract(x: &DMatrix<f64>) -> Result<DVector<f64>, SdpError> {
    extract_with_tol(x, RANK_RATIO_TOL)
}

pub fn extract_with_tol(x: &DMatrix<f64>, ratio_tol: f64) -> Result<DVector<f64>, SdpError> {
    let ratio = eigen_ratio(x);
    if !(ratio <= ratio_tol) {
        return Err(SdpError::NotRankOne { ratio });
    }
    let (_, vectors) = sorted_eigen(x);
    let mut v: DVector<f64> = vectors.column(0).into_owned();
    if v.sum() < 0.0 {
        v.neg_mut();
    }
    v.apply(|e| *e = e.max(0.0));
    let norm = v.norm();
    v /= norm;
    Ok(v)
}

/// Indices with `v_i > rel_tol * max(v)`.
pub fn support(v: &DVector<f64>, rel_tol: f64) -> Vec<usize> {
    let cut = rel_tol * v.max();
    (0..v.len()).filter(|&i| v[i] > cut).collect()
}
