//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clipper_core::affinity::build_affinity;
use clipper_core::io::{export_matrix_csv, read_associations, read_points};
use serde::Serialize;

use crate::config::{ConfigError, FileConfig, Method, RunConfig};
use crate::methods::{run_method, Problem, Status};
use crate::report::write_outputs;
use crate::runner::{run_scalability, run_sweep, summarize};

/// Exit code for configuration and usage errors.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code for I/O failures while reading inputs or writing results.
pub const EXIT_IO: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "clipper-bench", version, about = "Robust correspondence selection benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo sweep over outlier rates at fixed m.
    Sweep(SweepArgs),
    /// Solve time against the number of putative associations at 80% outliers.
    Scalability(SweepArgs),
    /// Select correspondences between two point cloud files.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated: clipper, sm, mc, dewc*, msrc*, sdr, ds*, gt.
    #[arg(long, value_delimiter = ',')]
    pub method: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    pub outlier_rates: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Putative associations per instance.
    #[arg(long)]
    pub m: Option<usize>,
    /// Sizes for the scalability sweep.
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub n_points: Option<usize>,
    /// Base seed; trial t uses seed + t.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Noise standard deviation.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Consistency cutoff; defaults to twice the noise bound.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Score kernel width; defaults to epsilon / 3.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run trials serially so solver timings are uncontended.
    #[arg(long)]
    pub timing: bool,
    /// Size cap for the dewc* and msrc* oracles.
    #[arg(long)]
    pub oracle_cap: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Edge threshold for the mc baseline.
    #[arg(long)]
    pub mc_threshold: Option<f64>,
}

impl SweepArgs {
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(&FileConfig::load(path)?)?;
        }
        if let Some(v) = &self.method {
            cfg.methods = v.clone();
        }
        if let Some(v) = &self.outlier_rates {
            cfg.outlier_rates = v.clone();
        }
        if let Some(v) = &self.m_grid {
            cfg.m_grid = v.clone();
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.m {
            cfg.synthetic.m_putative = v;
        }
        if let Some(v) = self.n_points {
            cfg.synthetic.n_points = v;
        }
        if let Some(v) = self.seed {
            cfg.synthetic.seed = v;
        }
        if let Some(v) = self.gamma {
            cfg.synthetic.gamma = v;
        }
        if self.epsilon.is_some() {
            cfg.epsilon = self.epsilon;
        }
        if self.sigma.is_some() {
            cfg.sigma = self.sigma;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if self.timing {
            cfg.timing = true;
        }
        if self.oracle_cap.is_some() {
            cfg.oracle_cap = self.oracle_cap;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if let Some(v) = self.mc_threshold {
            cfg.mc_threshold = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Source points: text (x y z per line) or `.bin` packed f64 triples.
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// CSV of zero-based `p_index,q_index` pairs.
    #[arg(long)]
    pub assoc: PathBuf,
    #[arg(long, default_value = "clipper")]
    pub method: Method,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Write the selection JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also export the affinity and constraint matrices as CSV into this directory.
    #[arg(long)]
    pub export_matrices: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SolveReport {
    method: Method,
    status: Status,
    selected: Option<Vec<usize>>,
    solve_ms: f64,
    detail: Option<String>,
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn io_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_IO)
}

pub fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Sweep(args) => {
            let cfg = match args.resolve() {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let rows = run_sweep(&cfg).expect("validated config");
            finish("sweep", &cfg, &rows)
        }
        Command::Scalability(args) => {
            let cfg = match args.resolve() {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let rows = match run_scalability(&cfg) {
                Ok(r) => r,
                Err(e) => return config_error(e),
            };
            finish("scalability", &cfg, &rows)
        }
        Command::Solve(args) => solve(&args),
    }
}

fn finish(stem: &str, cfg: &RunConfig, rows: &[crate::runner::TrialRow]) -> ExitCode {
    let summary = summarize(rows);
    match write_outputs(&cfg.out, stem, stem, cfg, rows, &summary) {
        Ok(files) => {
            let failed = rows.iter().filter(|r| r.status != Status::Ok).count();
            eprintln!(
                "{} rows ({} not ok) written to {}",
                rows.len(),
                failed,
                files.rows.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => io_error(e),
    }
}

fn solve(args: &SolveArgs) -> ExitCode {
    if args.method == Method::Gt {
        return config_error("method gt needs ground truth and is not available for files");
    }
    let eps = args.epsilon;
    let score = match clipper_core::ScoreParams::new(eps, args.sigma.unwrap_or(eps / 3.0)) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    let (source, target, assoc) = match (
        read_points(&args.source),
        read_points(&args.target),
        read_associations(&args.assoc),
    ) {
        (Ok(s), Ok(t), Ok(a)) => (s, t, a),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return io_error(e),
    };
    let (m, c) = match build_affinity(&source, &target, &assoc, &score) {
        Ok(mc) => mc,
        Err(e) => return config_error(e),
    };
    if let Some(dir) = &args.export_matrices {
        let written = std::fs::create_dir_all(dir)
            .map_err(clipper_core::io::IoError::from)
            .and_then(|_| export_matrix_csv(&dir.join("affinity.csv"), m.as_matrix()))
            .and_then(|_| export_matrix_csv(&dir.join("constraint.csv"), c.as_matrix()));
        if let Err(e) = written {
            return io_error(e);
        }
    }
    let mask = vec![false; assoc.len()];
    let cfg = RunConfig::default();
    let problem = Problem {
        m: &m,
        c: &c,
        putative: &assoc,
        inlier_mask: &mask,
    };
    let out = run_method(args.method, &problem, &cfg);
    let report = SolveReport {
        method: args.method,
        status: out.status,
        selected: out.selection.map(|s| s.indices().to_vec()),
        solve_ms: out.solve_time.as_secs_f64() * 1e3,
        detail: out.detail,
    };
    let json = serde_json::to_string_pretty(&report).expect("serializable");
    match &args.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, json) {
                return io_error(e);
            }
        }
        None => println!("{json}"),
    }
    ExitCode::SUCCESS
}
