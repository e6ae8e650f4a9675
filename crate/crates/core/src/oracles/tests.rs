use super::*;
use crate::fixtures::competing_cliques_with_constraints;
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random affinity with unit diagonal; each off-diagonal entry is zero with
/// probability `p_zero`, otherwise uniform in (0, 1].
fn random_instance(rng: &mut ChaCha8Rng, n: usize, p_zero: f64) -> (AffinityMatrix, ConstraintMatrix) {
    let mut a = DMatrix::identity(n, n);
    for j in 0..n {
        for i in 0..j {
            let x = if rng.random::<f64>() < p_zero {
                0.0
            } else {
                1.0 - rng.random::<f64>()
            };
            a[(i, j)] = x;
            a[(j, i)] = x;
        }
    }
    let m = AffinityMatrix::from_matrix(a).unwrap();
    let c = ConstraintMatrix::from_affinity(&m);
    (m, c)
}

/// Full `2^m` sweep over subsets, keeping cliques only.
fn subset_sweep_dewc(m: &AffinityMatrix, c: &ConstraintMatrix) -> (Vec<usize>, f64) {
    let n = m.dim();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for mask in 1u32..(1 << n) {
        let s: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        if !c.is_clique(&s) {
            continue;
        }
        let mut total = 0.0;
        for &i in &s {
            for &j in &s {
                total += m.get(i, j);
            }
        }
        let d = total / s.len() as f64;
        if preferable(d, &s, best.1, &best.0) {
            best = (s, d);
        }
    }
    best
}

#[test]
fn density_of_competing_cliques() {
    let (m, _) = competing_cliques_with_constraints();
    assert_eq!(density(&m, &Selection::from_indices([0, 1])).unwrap(), 2.0);
    assert_relative_eq!(density(&m, &Selection::from_indices([2, 3, 4])).unwrap(), 1.4, epsilon = 1e-15);
    assert_eq!(density(&m, &Selection::from_indices([3])).unwrap(), 1.0);
}

#[test]
fn density_errors() {
    let (m, _) = competing_cliques_with_constraints();
    assert_eq!(density(&m, &Selection::empty()), Err(OracleError::EmptySelection));
    assert!(matches!(
        density(&m, &Selection::from_indices([7])),
        Err(OracleError::IndexOutOfRange { .. })
    ));
}

#[test]
fn density_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let (m, _) = random_instance(&mut rng, 9, 0.3);
        let sel: Vec<usize> = (0..9).filter(|_| rng.random::<bool>()).collect();
        if sel.is_empty() {
            continue;
        }
        let mut total = 0.0;
        for &i in &sel {
            for &j in &sel {
                total += m.as_matrix()[(i, j)];
            }
        }
        let expected = total / sel.len() as f64;
        assert_relative_eq!(
            density(&m, &Selection::from_indices(sel)).unwrap(),
            expected,
            epsilon = 1e-13
        );
    }
}

#[test]
fn dewc_on_competing_cliques() {
    let (m, c) = competing_cliques_with_constraints();
    let opt = dewc_bruteforce(&m, &c).unwrap();
    assert_eq!(opt.selection.indices(), &[0, 1]);
    assert_eq!(opt.density, 2.0);
}

#[test]
fn dewc_matches_subset_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..60 {
        let (m, c) = random_instance(&mut rng, 10, [0.2, 0.5, 0.8][trial % 3]);
        let opt = dewc_bruteforce(&m, &c).unwrap();
        let (sel, d) = subset_sweep_dewc(&m, &c);
        assert_eq!(opt.selection.indices(), sel.as_slice(), "trial {trial}");
        assert_relative_eq!(opt.density, d, epsilon = 1e-12);
    }
}

#[test]
fn dewc_binary_reduces_to_max_clique() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let n = 12;
        let mut a = DMatrix::identity(n, n);
        for j in 0..n {
            for i in 0..j {
                let x = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        let m = AffinityMatrix::from_matrix(a).unwrap();
        let c = ConstraintMatrix::from_affinity(&m);
        let opt = dewc_bruteforce(&m, &c).unwrap();
        let mc = max_clique_exact(&Graph::from_constraints(&c), &MaxCliqueOptions::default()).unwrap();
        assert_eq!(opt.selection.len(), mc.clique.len());
        assert_eq!(opt.density, opt.selection.len() as f64);
    }
}

#[test]
fn dewc_cap() {
    let m = AffinityMatrix::from_matrix(DMatrix::identity(21, 21)).unwrap();
    let c = ConstraintMatrix::from_affinity(&m);
    assert_eq!(
        dewc_bruteforce(&m, &c),
        Err(OracleError::CapExceeded { size: 21, cap: 20 })
    );
    assert!(matches!(
        msrc_bruteforce_with_cap(&m, &c, 10),
        Err(OracleError::CapExceeded { size: 21, cap: 10 })
    ));
}

#[test]
fn msrc_unconstrained_is_whole_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (m, _) = random_instance(&mut rng, 8, 0.0);
    let c = ConstraintMatrix::zeros(8);
    let opt = msrc_bruteforce(&m, &c).unwrap();
    assert_eq!(opt.clique, Selection::all(8));
    let lmax = m.as_matrix().clone().symmetric_eigen().eigenvalues.max();
    assert_relative_eq!(opt.value, lmax, epsilon = 1e-10);
    assert_relative_eq!(opt.v.norm(), 1.0, epsilon = 1e-12);
}

#[test]
fn msrc_on_competing_cliques() {
    let (m, c) = competing_cliques_with_constraints();
    let opt = msrc_bruteforce(&m, &c).unwrap();
    assert_eq!(opt.clique.indices(), &[0, 1]);
    assert_relative_eq!(opt.value, 2.0, epsilon = 1e-12);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for (x, e) in opt.v.iter().zip([h, h, 0.0, 0.0, 0.0]) {
        assert_relative_eq!(*x, e, epsilon = 1e-12);
    }
}

#[test]
fn maximal_cliques_of_small_graph() {
    let g = Graph::from_edges(5, [(0, 1), (0, 3), (1, 3), (0, 2), (0, 4), (2, 4)]);
    let cliques = maximal_cliques(&g).unwrap();
    assert_eq!(cliques, vec![vec![0, 1, 3], vec![0, 2, 4]]);
}

#[test]
fn relaxation_ordering_and_clique_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..40 {
        let (m, c) = random_instance(&mut rng, 11, [0.3, 0.6][trial % 2]);
        let dewc = dewc_bruteforce(&m, &c).unwrap();
        let msrc = msrc_bruteforce(&m, &c).unwrap();
        assert!(msrc.value >= dewc.density - 1e-12);
        assert!(c.is_clique(dewc.selection.indices()));
        assert!(c.is_clique(msrc.clique.indices()));
        // v attains the value
        let q = msrc.v.dot(&(m.as_matrix() * &msrc.v));
        assert_relative_eq!(q, msrc.value, epsilon = 1e-10);
    }
}

#[test]
fn densest_subgraph_convention_mapping() {
    let (m, c) = competing_cliques_with_constraints();
    let ds = densest_subgraph_exact(m.as_matrix()).unwrap();
    assert_eq!(ds.vertices.indices(), &[0, 1]);
    assert_relative_eq!(ds.density, 0.5);
    // 2 W(S)/|S| + mean diagonal == diagonal-inclusive density
    let dewc = dewc_bruteforce(&m, &c).unwrap();
    assert_eq!(ds.vertices, dewc.selection);
    assert_relative_eq!(ds.affinity_density(&m), dewc.density);
    assert_relative_eq!(ds.affinity_density(&m), density(&m, &ds.vertices).unwrap());
}
