//! Synthetic registration instances with bounded noise and a controlled
//! outlier rate.
//!
//! Each instance draws from one `ChaCha8Rng` seeded with `seed`, split into
//! independent streams: 0 for the point cloud, 1 for the noise, 2 for the
//! correspondence mixing, 3 for the ground-truth transform. Changing e.g. the
//! outlier rate therefore leaves the cloud and the noise untouched.

use std::collections::HashSet;

use nalgebra::{Point3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RigidTransform;
use crate::affinity::{Association, AssociationSet};

const STREAM_CLOUD: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_MIXING: u64 = 2;
const STREAM_TRANSFORM: u64 = 3;

/// Ground-truth translations are drawn from `[-1, 1]^3`.
pub const TRANSLATION_RANGE: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum SyntheticError {
    #[error("invalid synthetic parameter: {0}")]
    InvalidParams(&'static str),
    #[error("{requested} inliers requested but only {available} mutual nearest-neighbor pairs exist")]
    Infeasible { requested: usize, available: usize },
    #[error("{requested} outliers requested but only {available} false pairs exist")]
    TooManyOutliers { requested: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub n_points: usize,
    pub m_putative: usize,
    /// Fraction of putative associations that are false, in `[0, 1)`.
    pub outlier_rate: f64,
    /// Per-axis noise standard deviation.
    pub gamma: f64,
    /// Noise bound `beta = beta_factor * gamma`.
    pub beta_factor: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n_points: 500,
            m_putative: 100,
            outlier_rate: 0.9,
            gamma: 0.01,
            beta_factor: 5.54,
            seed: 0,
        }
    }
}

impl SyntheticParams {
    pub fn beta(&self) -> f64 {
        self.beta_factor * self.gamma
    }

    /// `round(m (1 - outlier_rate))`.
    pub fn inlier_count(&self) -> usize {
        (self.m_putative as f64 * (1.0 - self.outlier_rate)).round() as usize
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(SyntheticError::InvalidParams("gamma must be positive"));
        }
        if !(self.beta_factor > 0.0 && self.beta_factor.is_finite()) {
            return Err(SyntheticError::InvalidParams("beta_factor must be positive"));
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return Err(SyntheticError::InvalidParams("outlier_rate must be in [0, 1)"));
        }
        if self.n_points == 0 || self.m_putative == 0 {
            return Err(SyntheticError::InvalidParams("sizes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInstance {
    pub params: SyntheticParams,
    pub source: Vec<Point3<f64>>,
    /// Noisy source points moved by `ground_truth`.
    pub target: Vec<Point3<f64>>,
    pub putative: AssociationSet,
    pub inlier_mask: Vec<bool>,
    pub ground_truth: RigidTransform,
    /// Mutual nearest-neighbor pairs within `beta` before mixing.
    pub available_inliers: usize,
    /// Noise draws rejected for exceeding `beta`.
    pub noise_rejections: usize,
}

impl BenchmarkInstance {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }
}

/// `eta ~ N(0, gamma^2 I)` resampled until `||eta|| <= beta`; also returns
/// the number of rejected draws.
pub fn bounded_noise<R: Rng + ?Sized>(rng: &mut R, gamma: f64, beta: f64) -> (Vector3<f64>, usize) {
    let normal = Normal::new(0.0, gamma).expect("gamma validated");
    let mut rejected = 0;
    loop {
        let eta = Vector3::from_fn(|_, _| normal.sample(rng));
        if eta.norm() <= beta {
            return (eta, rejected);
        }
        rejected += 1;
    }
}

/// Samples `n_points` uniformly in the unit cube and builds an instance from them.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<BenchmarkInstance, SyntheticError> {
    params.validate()?;
    let mut rng = stream(params.seed, STREAM_CLOUD);
    let cloud: Vec<Point3<f64>> = (0..params.n_points)
        .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
        .collect();
    generate_from_cloud(cloud, params)
}

/// Builds an instance on a given source cloud; `params.n_points` is ignored.
pub fn generate_from_cloud(
    source: Vec<Point3<f64>>,
    params: &SyntheticParams,
) -> Result<BenchmarkInstance, SyntheticError> {
    params.validate()?;
    let n = source.len();
    let beta = params.beta();

    let mut rng = stream(params.seed, STREAM_NOISE);
    let mut noise_rejections = 0;
    let noisy: Vec<Point3<f64>> = source
        .iter()
        .map(|p| {
            let (eta, r) = bounded_noise(&mut rng, params.gamma, beta);
            noise_rejections += r;
            p + eta
        })
        .collect();

    let truth = mutual_nearest_within(&source, &noisy, beta);
    let n_in = params.inlier_count();
    if n_in > truth.len() {
        return Err(SyntheticError::Infeasible {
            requested: n_in,
            available: truth.len(),
        });
    }
    let n_out = params.m_putative - n_in;
    let false_pairs = n * n - truth.len();
    if n_out > false_pairs {
        return Err(SyntheticError::TooManyOutliers {
            requested: n_out,
            available: false_pairs,
        });
    }

    let mut rng = stream(params.seed, STREAM_MIXING);
    let truth_set: HashSet<(usize, usize)> = truth.iter().copied().collect();
    let mut pool = truth;
    pool.shuffle(&mut rng);
    let mut tagged: Vec<((usize, usize), bool)> =
        pool.into_iter().take(n_in).map(|pr| (pr, true)).collect();
    let mut used: HashSet<(usize, usize)> = HashSet::with_capacity(n_out);
    while used.len() < n_out {
        let pr = (rng.random_range(0..n), rng.random_range(0..n));
        if !truth_set.contains(&pr) && used.insert(pr) {
            tagged.push((pr, false));
        }
    }
    tagged.shuffle(&mut rng);

    let putative = AssociationSet::new(
        tagged
            .iter()
            .map(|&((i, j), _)| Association::new(i, j))
            .collect(),
    )
    .expect("pairs are distinct by construction");
    let inlier_mask = tagged.iter().map(|&(_, inlier)| inlier).collect();

    let mut rng = stream(params.seed, STREAM_TRANSFORM);
    let ground_truth = RigidTransform::random(&mut rng, TRANSLATION_RANGE);
    let target = noisy.iter().map(|q| ground_truth.apply(q)).collect();

    Ok(BenchmarkInstance {
        params: *params,
        source,
        target,
        putative,
        inlier_mask,
        ground_truth,
        available_inliers: truth_set.len(),
        noise_rejections,
    })
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Pairs `(i, j)` where `b[j]` is the nearest point of `b` to `a[i]`, `a[i]`
/// is the nearest point of `a` to `b[j]`, and they are within `radius`.
/// Sorted by `i`.
pub(crate) fn mutual_nearest_within(
    a: &[Point3<f64>],
    b: &[Point3<f64>],
    radius: f64,
) -> Vec<(usize, usize)> {
    let nearest = |p: &Point3<f64>, cloud: &[Point3<f64>]| -> Option<(usize, f64)> {
        cloud
            .iter()
            .enumerate()
            .map(|(k, q)| (k, (p - q).norm_squared()))
            .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
    };
    let back: Vec<Option<usize>> = b.iter().map(|q| nearest(q, a).map(|(k, _)| k)).collect();
    a.iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let (j, d2) = nearest(p, b)?;
            (back[j] == Some(i) && d2.sqrt() <= radius).then_some((i, j))
        })
        .collect()
}
