//! Robust data association by densest edge-weighted clique selection.
//!
//! Putative correspondences between two point sets are scored pairwise into a
//! weighted consistency graph ([`affinity`]). The densest clique of that graph
//! is approximated by the penalty-homotopy gradient solver in [`clipper`], or
//! certified through the semidefinite relaxation in [`sdp`]. [`oracles`]
//! holds exact enumeration solvers for small instances, [`baselines`] the
//! comparison methods, and [`geometry`] the registration side (synthetic
//! instances, least-squares alignment, error metrics).

pub mod affinity;
pub mod baselines;
pub mod clipper;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod oracles;
pub mod sdp;
pub mod selection;

pub use affinity::{
    build_affinity, AffinityMatrix, Association, AssociationSet, ConstraintMatrix, ScoreParams,
};
pub use clipper::{round_solution, solve_msrc, CliqueEstimate, DenseSolution, SolverParams};
pub use selection::Selection;
