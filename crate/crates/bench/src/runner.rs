//! Monte Carlo sweeps over outlier rates and problem sizes.

use std::collections::BTreeMap;
use std::time::Instant;

use clipper_core::affinity::build_affinity;
use clipper_core::geometry::{
    arun_least_squares, generate_synthetic, precision_recall, rotation_error, translation_error,
    BenchmarkInstance, SyntheticParams,
};
use clipper_core::oracles::{density, dewc_bruteforce_with_cap, DEWC_CAP};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Method, RunConfig};
use crate::methods::{run_method, Problem, Status};

/// One CSV row per (method, size, outlier rate, trial). Optional fields are
/// empty when the quantity is undefined for the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub method: Method,
    pub m: usize,
    pub outlier_rate: f64,
    pub trial: usize,
    pub seed: u64,
    pub inliers: usize,
    pub status: Status,
    pub selected: Option<usize>,
    pub true_positives: Option<usize>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Precision defaulted to 1 on an empty selection.
    pub empty_selection: Option<bool>,
    /// Whether the selection is a clique of the consistency graph.
    pub is_clique: Option<bool>,
    /// Clique density `u^T M u / u^T u` of the selection.
    pub objective: Option<f64>,
    /// Optimal clique density, when the instance is within the oracle cap.
    pub dewc_optimum: Option<f64>,
    /// `1 - objective / dewc_optimum`.
    pub gap: Option<f64>,
    pub rotation_error: Option<f64>,
    pub translation_error: Option<f64>,
    pub affinity_ms: f64,
    pub solve_ms: f64,
}

/// Column names of the row CSV, in order.
pub const ROW_COLUMNS: [&str; 20] = [
    "method",
    "m",
    "outlier_rate",
    "trial",
    "seed",
    "inliers",
    "status",
    "selected",
    "true_positives",
    "precision",
    "recall",
    "empty_selection",
    "is_clique",
    "objective",
    "dewc_optimum",
    "gap",
    "rotation_error",
    "translation_error",
    "affinity_ms",
    "solve_ms",
];

/// Columns that vary from run to run.
pub const TIMING_COLUMNS: [&str; 2] = ["affinity_ms", "solve_ms"];

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn instance_params(cfg: &RunConfig, m: usize, rate: f64, trial: usize) -> SyntheticParams {
    SyntheticParams {
        m_putative: m,
        outlier_rate: rate,
        seed: cfg.trial_seed(trial),
        ..cfg.synthetic
    }
}

/// All methods on one generated instance.
pub fn run_trial(cfg: &RunConfig, m: usize, rate: f64, trial: usize) -> Vec<TrialRow> {
    let params = instance_params(cfg, m, rate, trial);
    let blank = |method: Method, status: Status, inliers: usize, affinity_ms: f64| TrialRow {
        method,
        m,
        outlier_rate: rate,
        trial,
        seed: params.seed,
        inliers,
        status,
        selected: None,
        true_positives: None,
        precision: None,
        recall: None,
        empty_selection: None,
        is_clique: None,
        objective: None,
        dewc_optimum: None,
        gap: None,
        rotation_error: None,
        translation_error: None,
        affinity_ms,
        solve_ms: 0.0,
    };

    let inst = match generate_synthetic(&params) {
        Ok(inst) => inst,
        Err(e) => {
            log::warn!("trial {trial} at rate {rate}, m {m}: {e}");
            return cfg
                .methods
                .iter()
                .map(|&meth| blank(meth, Status::InstanceError, 0, 0.0))
                .collect();
        }
    };
    let score = cfg.score_params().expect("validated");
    let t0 = Instant::now();
    let built = build_affinity(&inst.source, &inst.target, &inst.putative, &score);
    let affinity_ms = ms(t0.elapsed());
    let inliers = inst.inlier_count();
    let (mm, cc) = match built {
        Ok(mc) => mc,
        Err(e) => {
            log::warn!("trial {trial} at rate {rate}, m {m}: {e}");
            return cfg
                .methods
                .iter()
                .map(|&meth| blank(meth, Status::InstanceError, inliers, affinity_ms))
                .collect();
        }
    };

    let cap = cfg.oracle_cap.unwrap_or(DEWC_CAP);
    let optimum = dewc_bruteforce_with_cap(&mm, &cc, cap).ok().map(|o| o.density);
    let problem = Problem {
        m: &mm,
        c: &cc,
        putative: &inst.putative,
        inlier_mask: &inst.inlier_mask,
    };

    cfg.methods
        .iter()
        .map(|&method| {
            let out = run_method(method, &problem, cfg);
            let mut row = blank(method, out.status, inliers, affinity_ms);
            row.solve_ms = ms(out.solve_time);
            row.dewc_optimum = optimum;
            if let Some(detail) = &out.detail {
                log::debug!("{method} trial {trial} rate {rate} m {m}: {detail}");
            }
            let Some(sel) = out.selection else {
                return row;
            };
            let pr = precision_recall(&sel, &inst.inlier_mask);
            row.selected = Some(sel.len());
            row.true_positives = Some(sel.iter().filter(|&i| inst.inlier_mask[i]).count());
            row.precision = Some(pr.precision);
            row.recall = Some(pr.recall);
            row.empty_selection = Some(pr.empty_selection);
            row.is_clique = Some(cc.is_clique(sel.indices()));
            if !sel.is_empty() {
                let obj = density(&mm, &sel).expect("nonempty selection");
                row.objective = Some(obj);
                row.gap = optimum.map(|opt| 1.0 - obj / opt);
            }
            register(&inst, &sel, &mut row);
            row
        })
        .collect()
}

fn register(inst: &BenchmarkInstance, sel: &clipper_core::Selection, row: &mut TrialRow) {
    match arun_least_squares(&inst.source, &inst.target, &inst.putative, sel) {
        Ok(t) => {
            row.rotation_error = Some(rotation_error(&t.rotation, &inst.ground_truth.rotation));
            row.translation_error =
                Some(translation_error(&t.translation, &inst.ground_truth.translation));
        }
        Err(_) => {
            if row.status == Status::Ok {
                row.status = Status::RegistrationFailed;
            }
        }
    }
}

fn pool(cfg: &RunConfig) -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.worker_threads() {
        b = b.num_threads(n);
    }
    b.build().expect("thread pool")
}

/// Runs `jobs` on the trial pool; rows come back in job order.
fn run_jobs(cfg: &RunConfig, jobs: Vec<(usize, f64, usize)>) -> Vec<TrialRow> {
    pool(cfg).install(|| {
        jobs.into_par_iter()
            .map(|(m, rate, trial)| run_trial(cfg, m, rate, trial))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    })
}

/// Every outlier rate times every trial at the configured `m`.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<TrialRow>, ConfigError> {
    cfg.validate()?;
    let m = cfg.synthetic.m_putative;
    let jobs = cfg
        .outlier_rates
        .iter()
        .flat_map(|&r| (0..cfg.trials).map(move |t| (m, r, t)))
        .collect();
    Ok(run_jobs(cfg, jobs))
}

/// Outlier rate used by the scalability sweep.
pub const SCALABILITY_RATE: f64 = 0.8;

/// Every `m` in the grid at 80% outliers. The cloud grows with `m` so that
/// enough mutual nearest-neighbor pairs exist.
pub fn run_scalability(cfg: &RunConfig) -> Result<Vec<TrialRow>, ConfigError> {
    cfg.validate()?;
    if cfg.m_grid.is_empty() {
        return Err(ConfigError::Invalid("m grid is empty".into()));
    }
    let mut rows = Vec::new();
    // sizes run one after another so large instances do not share cores
    for &m in &cfg.m_grid {
        let sized = RunConfig {
            synthetic: SyntheticParams {
                n_points: cfg.synthetic.n_points.max(m),
                ..cfg.synthetic
            },
            ..cfg.clone()
        };
        let jobs = (0..cfg.trials).map(|t| (m, SCALABILITY_RATE, t)).collect();
        rows.extend(run_jobs(&sized, jobs));
    }
    Ok(rows)
}

/// Means over the trials of one (method, m, outlier rate) group. Each mean
/// is over the rows where the quantity is defined; the matching count is
/// reported alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub m: usize,
    pub outlier_rate: f64,
    pub trials: usize,
    pub ok: usize,
    pub skipped: usize,
    pub evaluated: usize,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub registered: usize,
    pub mean_rotation_error: Option<f64>,
    pub mean_translation_error: Option<f64>,
    pub gap_count: usize,
    pub mean_gap: Option<f64>,
    pub mean_solve_ms: f64,
}

fn mean(vals: impl Iterator<Item = Option<f64>>) -> (usize, Option<f64>) {
    let (n, s) = vals.flatten().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n, (n > 0).then(|| s / n as f64))
}

pub fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, usize, u64), Vec<&TrialRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.method, r.m, r.outlier_rate.to_bits()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((method, m, rate_bits), g)| {
            let (evaluated, mean_precision) = mean(g.iter().map(|r| r.precision));
            let (_, mean_recall) = mean(g.iter().map(|r| r.recall));
            let (registered, mean_rotation_error) = mean(g.iter().map(|r| r.rotation_error));
            let (_, mean_translation_error) = mean(g.iter().map(|r| r.translation_error));
            let (gap_count, mean_gap) = mean(g.iter().map(|r| r.gap));
            let (_, solve) = mean(g.iter().map(|r| Some(r.solve_ms)));
            SummaryRow {
                method,
                m,
                outlier_rate: f64::from_bits(rate_bits),
                trials: g.len(),
                ok: g.iter().filter(|r| r.status == Status::Ok).count(),
                skipped: g.iter().filter(|r| r.status == Status::Skipped).count(),
                evaluated,
                mean_precision,
                mean_recall,
                registered,
                mean_rotation_error,
                mean_translation_error,
                gap_count,
                mean_gap,
                mean_solve_ms: solve.unwrap_or(0.0),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        RunConfig {
            methods: vec![Method::Clipper, Method::Dewc, Method::Gt],
            outlier_rates: vec![0.0, 0.5],
            trials: 2,
            synthetic: SyntheticParams {
                n_points: 40,
                m_putative: 10,
                ..SyntheticParams::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn rows_cover_the_grid_in_order() {
        let cfg = tiny();
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 3);
        let keys: Vec<_> = rows.iter().map(|r| (r.outlier_rate, r.trial, r.method)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        assert_eq!(keys.iter().map(|k| (k.0, k.1)).collect::<Vec<_>>(),
                   sorted.iter().map(|k| (k.0, k.1)).collect::<Vec<_>>());
        assert!(rows.iter().all(|r| r.status == Status::Ok));
    }

    #[test]
    fn ground_truth_row_is_perfect_and_all_inlier_rows_are_exact() {
        let cfg = RunConfig {
            outlier_rates: vec![0.0],
            trials: 1,
            synthetic: SyntheticParams {
                gamma: 1e-12,
                ..tiny().synthetic
            },
            // the default cutoff scales with gamma; noiseless means scores of 1
            epsilon: Some(0.05),
            ..tiny()
        };
        for r in run_sweep(&cfg).unwrap() {
            assert_eq!((r.precision, r.recall), (Some(1.0), Some(1.0)), "{}", r.method);
            assert!(r.rotation_error.unwrap() <= 1e-9);
            assert!(r.translation_error.unwrap() <= 1e-9);
            assert!(r.gap.unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn parallel_and_serial_runs_agree() {
        let mut cfg = tiny();
        cfg.threads = Some(4);
        let a = run_sweep(&cfg).unwrap();
        cfg.threads = Some(1);
        let b = run_sweep(&cfg).unwrap();
        let strip = |rows: Vec<TrialRow>| {
            rows.into_iter()
                .map(|mut r| {
                    r.affinity_ms = 0.0;
                    r.solve_ms = 0.0;
                    r
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(a), strip(b));
    }

    #[test]
    fn infeasible_instances_become_error_rows() {
        let cfg = RunConfig {
            outlier_rates: vec![0.0],
            trials: 1,
            synthetic: SyntheticParams {
                n_points: 4,
                m_putative: 10,
                ..SyntheticParams::default()
            },
            ..tiny()
        };
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.status == Status::InstanceError));
    }

    #[test]
    fn summary_counts() {
        let rows = run_sweep(&tiny()).unwrap();
        let s = summarize(&rows);
        assert_eq!(s.len(), 2 * 3);
        assert!(s.iter().all(|g| g.trials == 2 && g.ok == 2 && g.evaluated == 2));
    }
}
