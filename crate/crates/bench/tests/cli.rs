use std::path::{Path, PathBuf};
use std::process::Command;

use clipper_bench::report::read_rows;
use clipper_bench::runner::{ROW_COLUMNS, TIMING_COLUMNS};
use clipper_bench::{Method, Status, SummaryRow, TrialRow};

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clipper-bench"))
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/micro_sweep.csv")
}

const MICRO_SWEEP: &[&str] = &[
    "sweep",
    "--method",
    "clipper,sm,mc,dewc*,msrc*,sdr,ds*,gt",
    "--outlier-rates",
    "0.5,0.8",
    "--trials",
    "2",
    "--m",
    "12",
    "--n-points",
    "60",
    "--seed",
    "42",
];

fn run_micro_sweep(out: &Path) -> std::process::Output {
    bench()
        .args(MICRO_SWEEP)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

/// Replaces the timing columns with a fixed marker.
fn mask_timing(csv_text: &str) -> String {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let masked: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| TIMING_COLUMNS.contains(h))
        .map(|(i, _)| i)
        .collect();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(&headers).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let fields: Vec<&str> = rec
            .iter()
            .enumerate()
            .map(|(i, f)| if masked.contains(&i) { "*" } else { f })
            .collect();
        wtr.write_record(fields).unwrap();
    }
    String::from_utf8(wtr.into_inner().unwrap()).unwrap()
}

#[test]
fn micro_sweep_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_micro_sweep(dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), ROW_COLUMNS.join(","));
    let masked = mask_timing(&text);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_path().parent().unwrap()).unwrap();
        std::fs::write(golden_path(), &masked).unwrap();
    }
    let golden = std::fs::read_to_string(golden_path()).expect("golden file present");
    assert_eq!(masked, golden);
}

#[test]
fn repeated_runs_agree_apart_from_timing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_micro_sweep(a.path()).status.success());
    let out = bench()
        .args(MICRO_SWEEP)
        .args(["--threads", "1", "--out"])
        .arg(b.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let read = |d: &Path| mask_timing(&std::fs::read_to_string(d.join("sweep.csv")).unwrap());
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn summary_is_recomputable_from_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_micro_sweep(dir.path()).status.success());
    let rows: Vec<TrialRow> =
        read_rows(std::fs::File::open(dir.path().join("sweep.csv")).unwrap()).unwrap();
    let summary: Vec<SummaryRow> = csv::Reader::from_path(dir.path().join("sweep_summary.csv"))
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(summary.len(), 8 * 2);
    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    };
    for s in &summary {
        let group: Vec<&TrialRow> = rows
            .iter()
            .filter(|r| r.method == s.method && r.m == s.m && r.outlier_rate == s.outlier_rate)
            .collect();
        assert_eq!(group.len(), s.trials);
        let avg = |f: &dyn Fn(&TrialRow) -> Option<f64>| {
            let vals: Vec<f64> = group.iter().filter_map(|r| f(r)).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        assert!(close(s.mean_precision, avg(&|r| r.precision)));
        assert!(close(s.mean_recall, avg(&|r| r.recall)));
        assert!(close(s.mean_rotation_error, avg(&|r| r.rotation_error)));
        assert!(close(s.mean_translation_error, avg(&|r| r.translation_error)));
        assert!(close(s.mean_gap, avg(&|r| r.gap)));
        assert!(close(Some(s.mean_solve_ms), avg(&|r| Some(r.solve_ms))));
        assert_eq!(s.ok, group.iter().filter(|r| r.status == Status::Ok).count());
    }
}

#[test]
fn micro_sweep_sanity() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_micro_sweep(dir.path()).status.success());
    let rows = read_rows(std::fs::File::open(dir.path().join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 8 * 2 * 2);
    for r in &rows {
        match r.method {
            Method::Gt => assert_eq!((r.precision, r.recall), (Some(1.0), Some(1.0))),
            // the oracle is optimal among cliques
            Method::Dewc => assert!(r.gap.unwrap().abs() <= 1e-12),
            Method::Clipper | Method::Msrc | Method::Mc => assert_eq!(r.is_clique, Some(true)),
            _ => {}
        }
        if let (Some(g), Method::Clipper | Method::Msrc | Method::Sdr) = (r.gap, r.method) {
            assert!(g >= -1e-12, "{} beats the optimum", r.method);
        }
    }
    let echo: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("sweep_config.json")).unwrap())
            .unwrap();
    assert_eq!(echo["config"]["synthetic"]["seed"], 42);
    assert_eq!(echo["config"]["trials"], 2);
    assert!(echo["environment"]["threads"].as_u64().unwrap() >= 1);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "method = \"clipper\"\noutlier_rates = \"0.5\"\ntrials = 3\nm = 10\nn_points = 50\n",
    )
    .unwrap();
    let out = bench()
        .arg("sweep")
        .arg("--config")
        .arg(&cfg)
        .args(["--trials", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_rows(std::fs::File::open(dir.path().join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].method, rows[0].m), (Method::Clipper, 10));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| bench().args(args).output().unwrap().status.code();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&["sweep", "--outlier-rates", "1.2", "--out", out]), Some(2));
    assert_eq!(code(&["sweep", "--trials", "0", "--out", out]), Some(2));
    assert_eq!(code(&["sweep", "--method", "ransac", "--out", out]), Some(2));
    assert_eq!(code(&["sweep", "--config", "/nonexistent/run.toml"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    // per-trial failures are rows, not a failed run
    assert_eq!(
        code(&["sweep", "--method", "clipper", "--outlier-rates", "0", "--trials", "1",
               "--m", "50", "--n-points", "10", "--out", out]),
        Some(0)
    );
    let rows = read_rows(std::fs::File::open(dir.path().join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows[0].status, Status::InstanceError);
}

#[test]
fn scalability_marks_oracles_above_cap() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench()
        .args(["scalability", "--method", "clipper,dewc*", "--m-grid", "15,30", "--trials", "1"])
        .args(["--timing", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows =
        read_rows(std::fs::File::open(dir.path().join("scalability.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.outlier_rate, 0.8);
        let expect = if r.method == Method::Dewc && r.m > 20 { Status::Skipped } else { Status::Ok };
        assert_eq!(r.status, expect, "{} at m={}", r.method, r.m);
    }
}

#[test]
fn solve_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src.txt");
    let dst = dir.path().join("dst.txt");
    let assoc = dir.path().join("assoc.csv");
    // four points, target shifted by (1, 0, 0); the last association is wrong
    std::fs::write(&src, "0 0 0\n1 0 0\n0 1 0\n0 0 1\n").unwrap();
    std::fs::write(&dst, "1 0 0\n2 0 0\n1 1 0\n1 0 1\n").unwrap();
    std::fs::write(&assoc, "p_index,q_index\n0,0\n1,1\n2,2\n3,3\n0,3\n").unwrap();
    let report = dir.path().join("sel.json");
    let matrices = dir.path().join("mats");
    let out = bench()
        .arg("solve")
        .arg("--source")
        .arg(&src)
        .arg("--target")
        .arg(&dst)
        .arg("--assoc")
        .arg(&assoc)
        .args(["--epsilon", "0.05", "--out"])
        .arg(&report)
        .arg("--export-matrices")
        .arg(&matrices)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["status"], "ok");
    assert_eq!(json["selected"], serde_json::json!([0, 1, 2, 3]));
    assert!(matrices.join("affinity.csv").exists());
    assert!(matrices.join("constraint.csv").exists());

    let missing = bench()
        .args(["solve", "--source", "/nonexistent.txt", "--target"])
        .arg(&dst)
        .arg("--assoc")
        .arg(&assoc)
        .args(["--epsilon", "0.05"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}
