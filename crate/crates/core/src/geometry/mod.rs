//! Rigid registration from selected correspondences and its error metrics.

mod synthetic;

pub use synthetic::{generate_synthetic, BenchmarkInstance, SyntheticError, SyntheticParams};

use nalgebra::{Matrix3, Point3, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::AssociationSet;
use crate::selection::Selection;

#[derive(Debug, Error, PartialEq)]
pub enum RegistrationError {
    #[error("need at least 3 correspondences, got {0}")]
    TooFew(usize),
    #[error("selected index {index} out of range for {len} associations")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("association references a point outside the cloud")]
    PointOutOfRange,
    #[error("degenerate configuration (cross-covariance singular values {0:?})")]
    Degenerate([f64; 3]),
}

/// `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Rotation drawn uniformly from SO(3) (normalized Gaussian quaternion)
    /// and translation uniform in `[-t_max, t_max]^3`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, t_max: f64) -> Self {
        let q = loop {
            let q = Quaternion::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            if q.norm() > 1e-6 {
                break q;
            }
        };
        let rotation = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
        let translation = Vector3::from_fn(|_, _| rng.random_range(-t_max..=t_max));
        Self {
            rotation,
            translation,
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Max deviation of `R^T R` from the identity and `|det R - 1|`.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Matrix3::identity()).amax();
        (ortho, (r.determinant() - 1.0).abs())
    }
}

/// Least-squares rigid transform mapping the selected source points onto
/// their target points (SVD of the cross-covariance, with a reflection fix so
/// the result is a proper rotation).
pub fn arun_least_squares(
    source: &[Point3<f64>],
    target: &[Point3<f64>],
    assoc: &AssociationSet,
    sel: &Selection,
) -> Result<RigidTransform, RegistrationError> {
    if sel.len() < 3 {
        return Err(RegistrationError::TooFew(sel.len()));
    }
    let mut ps = Vec::with_capacity(sel.len());
    let mut qs = Vec::with_capacity(sel.len());
    for k in sel.iter() {
        if k >= assoc.len() {
            return Err(RegistrationError::IndexOutOfRange {
                index: k,
                len: assoc.len(),
            });
        }
        let a = assoc[k];
        let (Some(p), Some(q)) = (source.get(a.p_index), target.get(a.q_index)) else {
            return Err(RegistrationError::PointOutOfRange);
        };
        ps.push(*p);
        qs.push(*q);
    }
    arun_from_pairs(&ps, &qs)
}

/// Same as [`arun_least_squares`] on already paired points.
pub fn arun_from_pairs(
    ps: &[Point3<f64>],
    qs: &[Point3<f64>],
) -> Result<RigidTransform, RegistrationError> {
    assert_eq!(ps.len(), qs.len(), "point lists differ in length");
    let n = ps.len();
    if n < 3 {
        return Err(RegistrationError::TooFew(n));
    }
    let inv = 1.0 / n as f64;
    let pc: Vector3<f64> = ps.iter().map(|p| p.coords).sum::<Vector3<f64>>() * inv;
    let qc: Vector3<f64> = qs.iter().map(|q| q.coords).sum::<Vector3<f64>>() * inv;
    let mut h = Matrix3::zeros();
    for (p, q) in ps.iter().zip(qs) {
        h += (p.coords - pc) * (q.coords - qc).transpose();
    }

    let svd = h.svd(true, true);
    let mut sv = [svd.singular_values[0], svd.singular_values[1], svd.singular_values[2]];
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0] {
        return Err(RegistrationError::Degenerate(sv));
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    // flip the axis of the smallest singular value
    let k = (0..3)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap();
    let mut s = Matrix3::identity();
    s[(k, k)] = d;
    let rotation = v * s * u.transpose();
    let translation = qc - rotation * pc;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Geodesic angle between two rotations, `||Log(R_hat^T R)||`, in radians.
pub fn rotation_error(r_hat: &Matrix3<f64>, r: &Matrix3<f64>) -> f64 {
    let q = r_hat.transpose() * r;
    let skew = Vector3::new(q[(2, 1)] - q[(1, 2)], q[(0, 2)] - q[(2, 0)], q[(1, 0)] - q[(0, 1)]);
    let sin = 0.5 * skew.norm();
    let cos = 0.5 * (q.trace() - 1.0);
    sin.atan2(cos)
}

pub fn translation_error(t_hat: &Vector3<f64>, t: &Vector3<f64>) -> f64 {
    (t_hat - t).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    /// Set when the selection was empty and precision defaulted to 1.
    pub empty_selection: bool,
}

/// Precision and recall of `sel` against the true inliers. An empty selection
/// has precision 1 (flagged); no inliers at all gives recall 1.
pub fn precision_recall(sel: &Selection, inlier_mask: &[bool]) -> PrecisionRecall {
    assert!(
        sel.bound() <= inlier_mask.len(),
        "selection index beyond the inlier mask"
    );
    let hits = sel.iter().filter(|&i| inlier_mask[i]).count() as f64;
    let inliers = inlier_mask.iter().filter(|&&b| b).count() as f64;
    let empty = sel.is_empty();
    PrecisionRecall {
        precision: if empty { 1.0 } else { hits / sel.len() as f64 },
        recall: if inliers == 0.0 { 1.0 } else { hits / inliers },
        empty_selection: empty,
    }
}
