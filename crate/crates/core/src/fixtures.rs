//! Small hand-built affinity matrices shared by tests, examples and the CLI.

use crate::affinity::{AffinityMatrix, ConstraintMatrix};

/// Two disjoint candidate cliques: a tight pair `{0, 1}` with unit scores and
/// a looser triple `{2, 3, 4}` with pairwise scores of 0.2.
///
/// The triple wins on cardinality and on `u^T M u` (4.2 against 4), while the
/// pair wins on density (2 against 1.4).
pub fn competing_cliques() -> AffinityMatrix {
    #[rustfmt::skip]
    let rows = [
        1.0, 1.0, 0.0, 0.0, 0.0,
        1.0, 1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.2, 0.2,
        0.0, 0.0, 0.2, 1.0, 0.2,
        0.0, 0.0, 0.2, 0.2, 1.0,
    ];
    AffinityMatrix::from_rows(5, &rows).expect("valid fixture")
}

/// [`competing_cliques`] with its derived constraint matrix.
pub fn competing_cliques_with_constraints() -> (AffinityMatrix, ConstraintMatrix) {
    let m = competing_cliques();
    let c = ConstraintMatrix::from_affinity(&m);
    (m, c)
}
