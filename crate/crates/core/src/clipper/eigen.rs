use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::AffinityMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    #[error("matrix has no positive spectral mass (zero or empty matrix)")]
    Degenerate,
    #[error("power iteration did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIterationParams {
    /// Stop once `|Av - lambda v| <= tol * lambda`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PowerIterationParams {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: DVector<f64>,
}

/// Raw power-iteration result; `converged` is false when the cap was hit.
#[derive(Debug, Clone)]
pub struct PowerIterationOutcome {
    pub pair: Eigenpair,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Perron eigenpair of a symmetric nonnegative matrix.
///
/// Starts from the uniform vector, so for a nonnegative matrix every iterate
/// stays nonnegative.
pub fn principal_eigenvector(m: &AffinityMatrix) -> Result<Eigenpair, EigenError> {
    let out = power_iteration(m.as_matrix(), &PowerIterationParams::default())?;
    if out.converged {
        Ok(out.pair)
    } else {
        Err(EigenError::NotConverged {
            iterations: out.iterations,
            residual: out.relative_residual,
        })
    }
}

/// Power iteration on a symmetric nonnegative matrix.
///
/// A matrix with a zero on its diagonal may be bipartite-like (eigenvalue
/// `-lambda_1`), so the iteration then runs on `A + sI` with `s` half the
/// max row sum; the reported eigenvalue is unshifted.
pub fn power_iteration(
    a: &DMatrix<f64>,
    params: &PowerIterationParams,
) -> Result<PowerIterationOutcome, EigenError> {
    let n = a.nrows();
    if n == 0 {
        return Err(EigenError::Degenerate);
    }
    let shift = if a.diagonal().iter().all(|&x| x > 0.0) {
        0.0
    } else {
        0.5 * a
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };

    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut w = DVector::zeros(n);
    let mut residual = f64::INFINITY;
    for it in 0..params.max_iters {
        w.gemv(1.0, a, &v, 0.0);
        let lambda = v.dot(&w);
        if lambda <= 0.0 && w.norm() == 0.0 {
            return Err(EigenError::Degenerate);
        }
        // residual of the unshifted problem: (A v) - lambda v
        residual = (&w - &v * lambda).norm() / lambda.abs().max(f64::MIN_POSITIVE);
        if residual <= params.tol {
            return Ok(PowerIterationOutcome {
                pair: Eigenpair {
                    value: lambda,
                    vector: v,
                },
                iterations: it,
                relative_residual: residual,
                converged: true,
            });
        }
        if shift != 0.0 {
            w.axpy(shift, &v, 1.0);
        }
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(EigenError::Degenerate);
        }
        v.copy_from(&w);
        v /= norm;
    }
    w.gemv(1.0, a, &v, 0.0);
    let lambda = v.dot(&w);
    Ok(PowerIterationOutcome {
        pair: Eigenpair {
            value: lambda,
            vector: v,
        },
        iterations: params.max_iters,
        relative_residual: residual,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_pair(a: &DMatrix<f64>, pair: &Eigenpair) {
        let v = &pair.vector;
        assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
        assert!(v.iter().all(|&x| x >= 0.0));
        let r = (a * v - v * pair.value).norm();
        assert!(r <= 1e-8 * pair.value, "residual {r}");
    }

    #[test]
    fn identity_gives_unit_eigenvalue() {
        let m = AffinityMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let pair = principal_eigenvector(&m).unwrap();
        assert_relative_eq!(pair.value, 1.0, epsilon = 1e-12);
        check_pair(m.as_matrix(), &pair);
    }

    #[test]
    fn all_ones() {
        let m = AffinityMatrix::from_matrix(DMatrix::from_element(4, 4, 1.0)).unwrap();
        let pair = principal_eigenvector(&m).unwrap();
        assert_relative_eq!(pair.value, 4.0, epsilon = 1e-12);
        for x in pair.vector.iter() {
            assert_relative_eq!(*x, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut a = DMatrix::zeros(8, 8);
            for j in 0..8 {
                for i in 0..=j {
                    let x: f64 = rng.random();
                    a[(i, j)] = x;
                    a[(j, i)] = x;
                }
            }
            let m = AffinityMatrix::from_matrix(a.clone()).unwrap();
            let pair = principal_eigenvector(&m).unwrap();
            let oracle = a.clone().symmetric_eigen();
            let lmax = oracle.eigenvalues.max();
            assert!((pair.value - lmax).abs() <= 1e-8 * lmax);
            check_pair(&a, &pair);
        }
    }

    #[test]
    fn zero_diagonal_bipartite_converges() {
        // path graph on 3 vertices: eigenvalues +-sqrt(2), 0
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let out = power_iteration(&a, &PowerIterationParams::default()).unwrap();
        assert!(out.converged);
        assert_relative_eq!(out.pair.value, 2f64.sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let m = AffinityMatrix::from_matrix(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(principal_eigenvector(&m), Err(EigenError::Degenerate));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>());
        let a = (&a + a.transpose()) * 0.5;
        let out = power_iteration(
            &a,
            &PowerIterationParams {
                tol: 1e-15,
                max_iters: 2,
            },
        )
        .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
