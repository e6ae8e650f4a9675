//! One selection method applied to one instance, timed around the solver only.

use std::time::{Duration, Instant};

use clipper_core::affinity::{endpoint_conflicts, AffinityMatrix, AssociationSet, ConstraintMatrix};
use clipper_core::baselines::spectral_matching;
use clipper_core::oracles::{
    densest_subgraph_exact, dewc_bruteforce_with_cap, max_clique_exact, msrc_bruteforce_with_cap,
    Graph, MaxCliqueOptions, OracleError, DEWC_CAP, MSRC_CAP,
};
use clipper_core::sdp::{check_rank1, extract_with_tol, solve_msrc_sdr_with, SdpError, RANK_RATIO_TOL};
use clipper_core::{round_solution, solve_msrc, Selection};
use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};

/// Outcome code recorded with every result row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Instance above the method's size cap; nothing was run.
    Skipped,
    /// Search stopped on its time limit; the best selection so far is reported.
    Timeout,
    /// SDP solution failed the rank-one test; a rounded selection is reported.
    NotRankOne,
    NotConverged,
    SolverError,
    /// Selection found, but too few or degenerate points for registration.
    RegistrationFailed,
    /// The instance itself could not be generated.
    InstanceError,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Skipped => "skipped",
            Status::Timeout => "timeout",
            Status::NotRankOne => "not_rank_one",
            Status::NotConverged => "not_converged",
            Status::SolverError => "solver_error",
            Status::RegistrationFailed => "registration_failed",
            Status::InstanceError => "instance_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub selection: Option<Selection>,
    pub status: Status,
    pub solve_time: Duration,
    pub detail: Option<String>,
}

impl MethodOutcome {
    fn done(selection: Selection, status: Status, solve_time: Duration) -> Self {
        Self {
            selection: Some(selection),
            status,
            solve_time,
            detail: None,
        }
    }

    fn failed(status: Status, solve_time: Duration, detail: String) -> Self {
        Self {
            selection: None,
            status,
            solve_time,
            detail: Some(detail),
        }
    }
}

/// Inputs shared by all methods on one instance.
pub struct Problem<'a> {
    pub m: &'a AffinityMatrix,
    pub c: &'a ConstraintMatrix,
    pub putative: &'a AssociationSet,
    pub inlier_mask: &'a [bool],
}

fn oracle_failure(e: OracleError, t: Duration) -> MethodOutcome {
    match e {
        OracleError::CapExceeded { .. } => MethodOutcome::failed(Status::Skipped, t, e.to_string()),
        _ => MethodOutcome::failed(Status::SolverError, t, e.to_string()),
    }
}

pub fn run_method(method: Method, p: &Problem<'_>, cfg: &RunConfig) -> MethodOutcome {
    let start = Instant::now();
    match method {
        Method::Clipper => match solve_msrc(p.m, p.c, &cfg.solver, None) {
            Ok(sol) => {
                let est = round_solution(&sol, p.m, p.c);
                MethodOutcome::done(est.selected, Status::Ok, start.elapsed())
            }
            Err(e) => MethodOutcome::failed(Status::SolverError, start.elapsed(), e.to_string()),
        },
        Method::Sm => {
            let conflicts = endpoint_conflicts(p.putative);
            let sel = spectral_matching(p.m, &conflicts);
            MethodOutcome::done(sel, Status::Ok, start.elapsed())
        }
        Method::Mc => {
            let opts = MaxCliqueOptions {
                timeout: Some(Duration::from_secs_f64(cfg.mc_timeout)),
                ..MaxCliqueOptions::default()
            };
            let g = Graph::from_threshold(p.m, cfg.mc_threshold);
            match max_clique_exact(&g, &opts) {
                Ok(out) => {
                    let status = if out.optimal { Status::Ok } else { Status::Timeout };
                    MethodOutcome::done(out.clique, status, start.elapsed())
                }
                Err(e) => oracle_failure(e, start.elapsed()),
            }
        }
        Method::Dewc => {
            match dewc_bruteforce_with_cap(p.m, p.c, cfg.oracle_cap.unwrap_or(DEWC_CAP)) {
                Ok(opt) => MethodOutcome::done(opt.selection, Status::Ok, start.elapsed()),
                Err(e) => oracle_failure(e, start.elapsed()),
            }
        }
        Method::Msrc => {
            match msrc_bruteforce_with_cap(p.m, p.c, cfg.oracle_cap.unwrap_or(MSRC_CAP)) {
                Ok(opt) => MethodOutcome::done(opt.clique, Status::Ok, start.elapsed()),
                Err(e) => oracle_failure(e, start.elapsed()),
            }
        }
        Method::Sdr => match solve_msrc_sdr_with(p.m, p.c, &cfg.sdp) {
            Ok(sol) => {
                let tight = check_rank1(&sol.x, RANK_RATIO_TOL);
                let v = extract_with_tol(&sol.x, f64::INFINITY).expect("no rank requirement");
                let sel = clique_support(&v, p.c);
                let status = if tight { Status::Ok } else { Status::NotRankOne };
                MethodOutcome::done(sel, status, start.elapsed())
            }
            Err(e @ SdpError::CapExceeded { .. }) => {
                MethodOutcome::failed(Status::Skipped, start.elapsed(), e.to_string())
            }
            Err(e @ SdpError::NotConverged { .. }) => {
                MethodOutcome::failed(Status::NotConverged, start.elapsed(), e.to_string())
            }
            Err(e) => MethodOutcome::failed(Status::SolverError, start.elapsed(), e.to_string()),
        },
        Method::Ds => {
            if p.m.dim() > cfg.ds_cap {
                return MethodOutcome::failed(
                    Status::Skipped,
                    start.elapsed(),
                    format!("size {} exceeds ds cap {}", p.m.dim(), cfg.ds_cap),
                );
            }
            match densest_subgraph_exact(p.m.as_matrix()) {
                Ok(ds) => MethodOutcome::done(ds.vertices, Status::Ok, start.elapsed()),
                Err(e) => oracle_failure(e, start.elapsed()),
            }
        }
        Method::Gt => {
            let sel = Selection::from_indicator(p.inlier_mask);
            MethodOutcome::done(sel, Status::Ok, start.elapsed())
        }
    }
}

/// Entries above `1e-3 * max(v)`, taken in descending order and kept when
/// they conflict with nothing kept so far.
pub fn clique_support(v: &nalgebra::DVector<f64>, c: &ConstraintMatrix) -> Selection {
    let cut = 1e-3 * v.max();
    let mut order: Vec<usize> = (0..v.len()).filter(|&i| v[i] > cut).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| !c.is_constrained(i, k)) {
            kept.push(i);
        }
    }
    Selection::from_indices(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clipper_core::fixtures::competing_cliques_with_constraints;
    use nalgebra::DVector;

    #[test]
    fn every_method_selects_the_dense_pair_on_the_fixture() {
        let (m, c) = competing_cliques_with_constraints();
        // five associations with distinct endpoints
        let putative = AssociationSet::from_pairs((0..5).map(|i| (i, i))).unwrap();
        let mask = [true, true, false, false, false];
        let p = Problem {
            m: &m,
            c: &c,
            putative: &putative,
            inlier_mask: &mask,
        };
        let cfg = RunConfig::default();
        for method in Method::ALL {
            if method == Method::Mc {
                continue;
            }
            let out = run_method(method, &p, &cfg);
            assert_eq!(out.status, Status::Ok, "{method}");
            assert_eq!(out.selection.unwrap().indices(), &[0, 1], "{method}");
        }
        // unweighted max clique prefers the larger triangle
        let out = run_method(Method::Mc, &p, &cfg);
        assert_eq!(out.selection.unwrap().indices(), &[2, 3, 4]);
    }

    #[test]
    fn caps_mark_rows_skipped() {
        let (m, c) = competing_cliques_with_constraints();
        let putative = AssociationSet::from_pairs((0..5).map(|i| (i, i))).unwrap();
        let mask = [true; 5];
        let p = Problem {
            m: &m,
            c: &c,
            putative: &putative,
            inlier_mask: &mask,
        };
        let mut cfg = RunConfig {
            oracle_cap: Some(3),
            ds_cap: 3,
            ..RunConfig::default()
        };
        cfg.sdp.size_cap = 3;
        for method in [Method::Dewc, Method::Msrc, Method::Sdr, Method::Ds] {
            let out = run_method(method, &p, &cfg);
            assert_eq!(out.status, Status::Skipped, "{method}");
            assert!(out.selection.is_none());
        }
    }

    #[test]
    fn clique_support_drops_conflicts_and_dust() {
        let c = ConstraintMatrix::from_pairs(4, [(0, 2)]);
        let v = DVector::from_vec(vec![0.6, 0.5, 0.7, 1e-5]);
        assert_eq!(clique_support(&v, &c).indices(), &[1, 2]);
    }
}
