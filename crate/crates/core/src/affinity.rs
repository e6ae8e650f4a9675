//! Weighted consistency graph construction.
//!
//! Each putative association `u = (p, q)` becomes a vertex. Two associations
//! are scored by how well the rigid-motion invariant (pairwise Euclidean
//! distance) is preserved between them; pairs that share an endpoint are
//! forced inconsistent so that any clique is a one-to-one matching.

use nalgebra::{DMatrix, DVector, Point3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scores below this are stored as exact zeros (and therefore constrained).
pub const SCORE_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AffinityError {
    #[error("score parameters must be positive and finite (epsilon={epsilon}, sigma={sigma})")]
    InvalidParams { epsilon: f64, sigma: f64 },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("association {assoc} references {side} index {index}, but the point set has {len} points")]
    IndexOutOfBounds {
        assoc: usize,
        side: &'static str,
        index: usize,
        len: usize,
    },
    #[error("duplicate association ({p}, {q})")]
    DuplicateAssociation { p: usize, q: usize },
    #[error("association set is empty")]
    Empty,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("entry ({i}, {j}) = {value} is outside [0, 1]")]
    OutOfRange { i: usize, j: usize, value: f64 },
    #[error("expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// A putative correspondence between a source point and a target point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Association {
    pub p_index: usize,
    pub q_index: usize,
}

impl Association {
    pub fn new(p_index: usize, q_index: usize) -> Self {
        Self { p_index, q_index }
    }

    /// True when the two associations start or end at the same point.
    pub fn shares_endpoint(&self, other: &Association) -> bool {
        self.p_index == other.p_index || self.q_index == other.q_index
    }
}

/// Ordered list of distinct associations.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssociationSet(Vec<Association>);

impl AssociationSet {
    pub fn new(assoc: Vec<Association>) -> Result<Self, AffinityError> {
        let mut seen = std::collections::HashSet::with_capacity(assoc.len());
        for a in &assoc {
            if !seen.insert(*a) {
                return Err(AffinityError::DuplicateAssociation {
                    p: a.p_index,
                    q: a.q_index,
                });
            }
        }
        Ok(Self(assoc))
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(
        pairs: I,
    ) -> Result<Self, AffinityError> {
        Self::new(pairs.into_iter().map(|(p, q)| Association::new(p, q)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Association] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Association> {
        self.0.iter()
    }

    /// Checks every association against the sizes of the two point sets.
    pub fn validate_bounds(&self, n_source: usize, n_target: usize) -> Result<(), AffinityError> {
        for (k, a) in self.0.iter().enumerate() {
            if a.p_index >= n_source {
                return Err(AffinityError::IndexOutOfBounds {
                    assoc: k,
                    side: "source",
                    index: a.p_index,
                    len: n_source,
                });
            }
            if a.q_index >= n_target {
                return Err(AffinityError::IndexOutOfBounds {
                    assoc: k,
                    side: "target",
                    index: a.q_index,
                    len: n_target,
                });
            }
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for AssociationSet {
    type Output = Association;
    fn index(&self, i: usize) -> &Association {
        &self.0[i]
    }
}

/// Bounded-noise consistency score parameters, in length units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    /// Consistency cutoff: pairs with `|delta| > epsilon` score zero.
    pub epsilon: f64,
    /// Gaussian falloff of the score inside the cutoff.
    pub sigma: f64,
}

impl ScoreParams {
    pub fn new(epsilon: f64, sigma: f64) -> Result<Self, AffinityError> {
        let valid = |x: f64| x.is_finite() && x > 0.0;
        if !valid(epsilon) || !valid(sigma) {
            return Err(AffinityError::InvalidParams { epsilon, sigma });
        }
        Ok(Self { epsilon, sigma })
    }

    /// `sigma = epsilon / 3`, so the score at the cutoff is `exp(-4.5)`.
    pub fn from_epsilon(epsilon: f64) -> Result<Self, AffinityError> {
        Self::new(epsilon, epsilon / 3.0)
    }

    /// Cutoff for a known per-point noise radius `beta`: two perturbed
    /// endpoints change a distance by at most `2 * beta`.
    pub fn from_noise_bound(beta: f64) -> Result<Self, AffinityError> {
        Self::from_epsilon(2.0 * beta)
    }
}

/// `exp(-delta^2 / (2 sigma^2))` inside the cutoff, exactly zero outside.
pub fn consistency_score(delta: f64, params: &ScoreParams) -> Result<f64, AffinityError> {
    if !delta.is_finite() {
        return Err(AffinityError::NonFinite("delta"));
    }
    Ok(score_unchecked(delta, params))
}

#[inline]
fn score_unchecked(delta: f64, params: &ScoreParams) -> f64 {
    if delta.abs() > params.epsilon {
        return 0.0;
    }
    (-0.5 * delta * delta / (params.sigma * params.sigma)).exp()
}

/// Difference of pairwise distances `|p_i - p_j| - |q_i - q_j|`.
#[inline]
pub fn pairwise_delta(
    p_i: &Point3<f64>,
    p_j: &Point3<f64>,
    q_i: &Point3<f64>,
    q_j: &Point3<f64>,
) -> f64 {
    (p_i - p_j).norm() - (q_i - q_j).norm()
}

/// Symmetric pairwise consistency matrix with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    entries: DMatrix<f64>,
}

impl AffinityMatrix {
    /// Validates squareness, exact symmetry and the `[0, 1]` range.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self, AffinityError> {
        let (rows, cols) = entries.shape();
        if rows != cols {
            return Err(AffinityError::NotSquare { rows, cols });
        }
        for j in 0..cols {
            for i in 0..rows {
                let value = entries[(i, j)];
                if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                    return Err(AffinityError::OutOfRange { i, j, value });
                }
                if i < j && value != entries[(j, i)] {
                    return Err(AffinityError::NotSymmetric { i, j });
                }
            }
        }
        Ok(Self { entries })
    }

    /// Row-major construction, convenient for small literal fixtures.
    pub fn from_rows(m: usize, data: &[f64]) -> Result<Self, AffinityError> {
        if data.len() != m * m {
            return Err(AffinityError::DimensionMismatch {
                expected: m * m,
                actual: data.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(m, m, data))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.entries.diagonal()
    }

    /// Principal submatrix on `indices`.
    pub fn submatrix(&self, indices: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(indices.len(), indices.len(), |a, b| {
            self.entries[(indices[a], indices[b])]
        })
    }
}

/// Symmetric binary matrix with zero diagonal marking forbidden pairs.
///
/// Stored as `0.0 / 1.0` floats so it can be used directly in matrix-vector
/// products.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    entries: DMatrix<f64>,
}

impl ConstraintMatrix {
    /// Marks every off-diagonal zero of `m`.
    pub fn from_affinity(m: &AffinityMatrix) -> Self {
        let n = m.dim();
        let entries = DMatrix::from_fn(n, n, |i, j| {
            if i != j && m.get(i, j) == 0.0 {
                1.0
            } else {
                0.0
            }
        });
        Self { entries }
    }

    /// No constraints at all.
    pub fn zeros(m: usize) -> Self {
        Self {
            entries: DMatrix::zeros(m, m),
        }
    }

    /// Builds from a list of forbidden pairs (order irrelevant, diagonal ignored).
    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(m: usize, pairs: I) -> Self {
        let mut entries = DMatrix::zeros(m, m);
        for (i, j) in pairs {
            if i != j {
                entries[(i, j)] = 1.0;
                entries[(j, i)] = 1.0;
            }
        }
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn is_constrained(&self, i: usize, j: usize) -> bool {
        self.entries[(i, j)] != 0.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Number of unordered constrained pairs.
    pub fn count_pairs(&self) -> usize {
        let n = self.dim();
        (0..n)
            .map(|j| (0..j).filter(|&i| self.is_constrained(i, j)).count())
            .sum()
    }

    /// True when no pair inside `indices` is constrained.
    pub fn is_clique(&self, indices: &[usize]) -> bool {
        indices.iter().enumerate().all(|(a, &i)| {
            indices[a + 1..]
                .iter()
                .all(|&j| !self.is_constrained(i, j))
        })
    }
}

/// Builds `M` and `C` for putative associations between two point sets.
///
/// Off-diagonal entries are consistency scores of the pairwise distance
/// difference; pairs sharing a source or target point are zeroed. The
/// diagonal is 1.
pub fn build_affinity(
    source: &[Point3<f64>],
    target: &[Point3<f64>],
    assoc: &AssociationSet,
    params: &ScoreParams,
) -> Result<(AffinityMatrix, ConstraintMatrix), AffinityError> {
    build_affinity_with_diagonal(source, target, assoc, params, None)
}

/// As [`build_affinity`], with optional per-association confidence scores
/// on the diagonal.
pub fn build_affinity_with_diagonal(
    source: &[Point3<f64>],
    target: &[Point3<f64>],
    assoc: &AssociationSet,
    params: &ScoreParams,
    diagonal: Option<&[f64]>,
) -> Result<(AffinityMatrix, ConstraintMatrix), AffinityError> {
    ScoreParams::new(params.epsilon, params.sigma)?;
    if assoc.is_empty() {
        return Err(AffinityError::Empty);
    }
    assoc.validate_bounds(source.len(), target.len())?;
    let m = assoc.len();
    if let Some(d) = diagonal {
        if d.len() != m {
            return Err(AffinityError::DimensionMismatch {
                expected: m,
                actual: d.len(),
            });
        }
        if let Some((i, &value)) = d
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || !(0.0..=1.0).contains(*v))
        {
            return Err(AffinityError::OutOfRange { i, j: i, value });
        }
    }
    for a in assoc.iter() {
        let p = &source[a.p_index];
        let q = &target[a.q_index];
        if !p.coords.iter().chain(q.coords.iter()).all(|x| x.is_finite()) {
            return Err(AffinityError::NonFinite("point coordinate"));
        }
    }

    let a = assoc.as_slice();
    let mut entries = DMatrix::zeros(m, m);
    for j in 0..m {
        entries[(j, j)] = diagonal.map_or(1.0, |d| d[j]);
        let (pj, qj) = (&source[a[j].p_index], &target[a[j].q_index]);
        for i in 0..j {
            if a[i].shares_endpoint(&a[j]) {
                continue;
            }
            let (pi, qi) = (&source[a[i].p_index], &target[a[i].q_index]);
            let mut s = score_unchecked(pairwise_delta(pi, pj, qi, qj), params);
            if s < SCORE_FLOOR {
                s = 0.0;
            }
            entries[(i, j)] = s;
            entries[(j, i)] = s;
        }
    }
    let m_mat = AffinityMatrix { entries };
    let c_mat = ConstraintMatrix::from_affinity(&m_mat);
    Ok((m_mat, c_mat))
}

/// Pairs of associations that share a source or a target point.
///
/// These are the one-to-one conflicts alone, without any geometric test.
pub fn endpoint_conflicts(assoc: &AssociationSet) -> ConstraintMatrix {
    let a = assoc.as_slice();
    let pairs = (0..a.len()).flat_map(|j| {
        (0..j)
            .filter(move |&i| a[i].shares_endpoint(&a[j]))
            .map(move |i| (i, j))
    });
    ConstraintMatrix::from_pairs(a.len(), pairs)
}
