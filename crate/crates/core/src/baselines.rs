//! Comparison selectors: spectral matching and max clique on a thresholded
//! consistency graph.

use nalgebra::DVector;

use crate::affinity::{AffinityMatrix, ConstraintMatrix};
use crate::clipper::{power_iteration, PowerIterationParams};
use crate::oracles::{max_clique_exact, Graph, MaxCliqueOptions, OracleError};
use crate::selection::Selection;

/// Eigenvector entries at or below this fraction of the largest entry count as zero.
pub const SM_ZERO_REL: f64 = 1e-6;

/// Spectral matching with greedy discretization.
///
/// Takes the principal eigenvector of `m`, then repeatedly accepts the largest
/// remaining entry and discards every entry in conflict with it under
/// `conflicts` (typically the one-to-one endpoint conflicts). Stops when the
/// next candidate is zero. The result need not be a clique of the
/// consistency graph.
pub fn spectral_matching(m: &AffinityMatrix, conflicts: &ConstraintMatrix) -> Selection {
    assert_eq!(m.dim(), conflicts.dim(), "affinity and conflict sizes differ");
    let v = match power_iteration(m.as_matrix(), &PowerIterationParams::default()) {
        Ok(out) => {
            if !out.converged {
                log::warn!(
                    "spectral matching eigenvector not converged (residual {:e})",
                    out.relative_residual
                );
            }
            out.pair.vector
        }
        Err(_) => return Selection::empty(),
    };
    greedy_discretize(&v, conflicts)
}

/// Greedy one-to-one discretization of a score vector.
pub fn greedy_discretize(v: &DVector<f64>, conflicts: &ConstraintMatrix) -> Selection {
    let cut = SM_ZERO_REL * v.max().max(0.0);
    let mut alive: Vec<bool> = v.iter().map(|&x| x > cut).collect();
    let mut chosen = Vec::new();
    loop {
        let next = (0..v.len())
            .filter(|&i| alive[i])
            .max_by(|&a, &b| v[a].total_cmp(&v[b]).then(b.cmp(&a)));
        let Some(i) = next else { break };
        chosen.push(i);
        alive[i] = false;
        for (j, a) in alive.iter_mut().enumerate() {
            if *a && conflicts.is_constrained(i, j) {
                *a = false;
            }
        }
    }
    Selection::from_indices(chosen)
}

/// Binarizes `m` (edge iff `M_ij >= threshold` and `M_ij > 0`) and returns
/// an exact maximum clique of the resulting graph.
pub fn threshold_then_max_clique(
    m: &AffinityMatrix,
    threshold: f64,
    opts: &MaxCliqueOptions,
) -> Result<Selection, OracleError> {
    let g = Graph::from_threshold(m, threshold);
    let out = max_clique_exact(&g, opts)?;
    if !out.optimal {
        log::warn!("max clique search timed out; returning best clique found");
    }
    Ok(out.clique)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::{build_affinity, endpoint_conflicts, AssociationSet, ScoreParams};
    use crate::fixtures::competing_cliques;
    use nalgebra::{DMatrix, Point3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dominant_block_wins() {
        let mut a = DMatrix::identity(6, 6);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            a[(i, j)] = 0.9;
            a[(j, i)] = 0.9;
        }
        a[(3, 4)] = 0.3;
        a[(4, 3)] = 0.3;
        let m = AffinityMatrix::from_matrix(a).unwrap();
        // 0 and 5 share an endpoint
        let conflicts = ConstraintMatrix::from_pairs(6, [(0, 5)]);
        let sel = spectral_matching(&m, &conflicts);
        assert_eq!(sel.indices(), &[0, 1, 2]);
    }

    #[test]
    fn competing_cliques_takes_the_dense_pair_first() {
        let m = competing_cliques();
        let sel = spectral_matching(&m, &ConstraintMatrix::zeros(5));
        // the Perron vector lives on the {0,1} block; the 3-block is zero there
        assert_eq!(sel.indices(), &[0, 1]);
    }

    #[test]
    fn noiseless_all_inliers_are_all_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point3<f64>> = (0..12)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let assoc = AssociationSet::from_pairs((0..12).map(|i| (i, i))).unwrap();
        let (m, _) = build_affinity(&pts, &pts, &assoc, &ScoreParams::from_epsilon(0.05).unwrap()).unwrap();
        let sel = spectral_matching(&m, &endpoint_conflicts(&assoc));
        assert_eq!(sel, Selection::all(12));
    }

    #[test]
    fn discretization_respects_conflicts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = 15;
            let v = DVector::from_fn(n, |_, _| rng.random::<f64>());
            let pairs: Vec<(usize, usize)> = (0..20)
                .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
                .filter(|(i, j)| i != j)
                .collect();
            let c = ConstraintMatrix::from_pairs(n, pairs);
            let sel = greedy_discretize(&v, &c);
            assert!(c.is_clique(sel.indices()));
            // maximal: every rejected entry conflicts with a chosen one
            for i in 0..n {
                if !sel.contains(i) {
                    assert!(sel.iter().any(|j| c.is_constrained(i, j)));
                }
            }
        }
    }

    #[test]
    fn thresholded_max_clique_examples() {
        let m = competing_cliques();
        let opts = MaxCliqueOptions::default();
        assert_eq!(threshold_then_max_clique(&m, 0.5, &opts).unwrap().indices(), &[0, 1]);
        assert_eq!(threshold_then_max_clique(&m, 0.1, &opts).unwrap().indices(), &[2, 3, 4]);
        let full = AffinityMatrix::from_matrix(DMatrix::from_element(4, 4, 0.7)).unwrap();
        assert_eq!(threshold_then_max_clique(&full, 0.0, &opts).unwrap(), Selection::all(4));
    }

    #[test]
    fn thresholded_output_is_a_clique() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let n = 14;
            let mut a = DMatrix::identity(n, n);
            for j in 0..n {
                for i in 0..j {
                    let x: f64 = if rng.random::<bool>() { rng.random() } else { 0.0 };
                    a[(i, j)] = x;
                    a[(j, i)] = x;
                }
            }
            let m = AffinityMatrix::from_matrix(a).unwrap();
            let thr = rng.random::<f64>() * 0.5;
            let sel = threshold_then_max_clique(&m, thr, &MaxCliqueOptions::default()).unwrap();
            let g = Graph::from_threshold(&m, thr);
            assert!(g.is_clique(sel.indices()));
        }
    }
}
