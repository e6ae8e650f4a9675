//! File formats: point clouds, association lists, matrix exports, and
//! benchmark instances (JSON header plus binary point sidecar).
//!
//! Text point clouds hold one `x y z` triple per line, separated by
//! whitespace or commas; blank lines and lines starting with `#` are skipped.
//! Binary point clouds are packed little-endian `f64` triples. Associations
//! are `p_index,q_index` lines with zero-based indices, optionally preceded
//! by a header line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Point3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::{AffinityError, Association, AssociationSet};
use crate::geometry::{BenchmarkInstance, RigidTransform, SyntheticParams};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Affinity(#[from] AffinityError),
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
}

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    reader.lines().enumerate().map(|(k, l)| (k + 1, l))
}

fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

/// Reads a text point cloud from any reader.
pub fn parse_points<R: BufRead>(reader: R) -> Result<Vec<Point3<f64>>, IoError> {
    let mut out = Vec::new();
    for (line_no, line) in content_lines(reader) {
        let line = line?;
        if is_skippable(&line) {
            continue;
        }
        let vals: Vec<f64> = fields(&line)
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| IoError::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
        if vals.len() != 3 {
            return Err(IoError::Parse {
                line: line_no,
                msg: format!("expected 3 coordinates, found {}", vals.len()),
            });
        }
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(IoError::Parse {
                line: line_no,
                msg: "non-finite coordinate".into(),
            });
        }
        out.push(Point3::new(vals[0], vals[1], vals[2]));
    }
    Ok(out)
}

pub fn read_points_text(path: &Path) -> Result<Vec<Point3<f64>>, IoError> {
    parse_points(BufReader::new(File::open(path)?))
}

pub fn write_points_text(path: &Path, points: &[Point3<f64>]) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    w.flush()?;
    Ok(())
}

/// Decodes packed little-endian `f64` triples.
pub fn decode_points_binary(bytes: &[u8]) -> Result<Vec<Point3<f64>>, IoError> {
    if !bytes.len().is_multiple_of(24) {
        return Err(IoError::Format(format!(
            "binary point data of {} bytes is not a whole number of xyz triples",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(24)
        .map(|c| {
            let f = |k: usize| f64::from_le_bytes(c[8 * k..8 * k + 8].try_into().unwrap());
            Point3::new(f(0), f(1), f(2))
        })
        .collect())
}

pub fn encode_points_binary(points: &[Point3<f64>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * 24);
    for p in points {
        for x in [p.x, p.y, p.z] {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn read_points_binary(path: &Path) -> Result<Vec<Point3<f64>>, IoError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_points_binary(&bytes)
}

pub fn write_points_binary(path: &Path, points: &[Point3<f64>]) -> Result<(), IoError> {
    std::fs::write(path, encode_points_binary(points))?;
    Ok(())
}

/// Picks the reader from the extension: `.bin` is binary, anything else text.
pub fn read_points(path: &Path) -> Result<Vec<Point3<f64>>, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_points_binary(path),
        _ => read_points_text(path),
    }
}

pub fn parse_associations<R: BufRead>(reader: R) -> Result<AssociationSet, IoError> {
    let mut pairs = Vec::new();
    let mut seen_data = false;
    for (line_no, line) in content_lines(reader) {
        let line = line?;
        if is_skippable(&line) {
            continue;
        }
        let toks: Vec<&str> = fields(&line).collect();
        let parsed: Result<Vec<usize>, _> = toks.iter().map(|s| s.parse::<usize>()).collect();
        match parsed {
            Ok(v) if v.len() == 2 => {
                pairs.push(Association::new(v[0], v[1]));
                seen_data = true;
            }
            // a non-numeric first line is a header
            Err(_) if !seen_data && toks.iter().all(|t| t.parse::<f64>().is_err()) => {
                seen_data = true;
            }
            _ => {
                return Err(IoError::Parse {
                    line: line_no,
                    msg: format!("expected two nonnegative indices, found {line:?}"),
                })
            }
        }
    }
    Ok(AssociationSet::new(pairs)?)
}

pub fn read_associations(path: &Path) -> Result<AssociationSet, IoError> {
    parse_associations(BufReader::new(File::open(path)?))
}

pub fn write_associations(path: &Path, assoc: &AssociationSet) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "p_index,q_index")?;
    for a in assoc.iter() {
        writeln!(w, "{},{}", a.p_index, a.q_index)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a dense matrix as CSV, one row per line, shortest round-trip
/// decimal representation.
pub fn write_matrix_csv<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<(), IoError> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn export_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_csv(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn parse_matrix_csv<R: BufRead>(reader: R) -> Result<DMatrix<f64>, IoError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in content_lines(reader) {
        let line = line?;
        if is_skippable(&line) {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(IoError::Parse {
                    line: line_no,
                    msg: format!("row has {} columns, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

const INSTANCE_FORMAT: &str = "clipper-benchmark-instance";
const INSTANCE_VERSION: u32 = 1;

/// JSON header of a stored instance; the points live in the sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceHeader {
    format: String,
    version: u32,
    params: SyntheticParams,
    ground_truth: RigidTransform,
    putative: Vec<[usize; 2]>,
    inlier_mask: Vec<bool>,
    available_inliers: usize,
    noise_rejections: usize,
    sidecar: SidecarLayout,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SidecarLayout {
    file: String,
    encoding: String,
    source_points: usize,
    target_points: usize,
}

/// Sidecar path for a header path: same stem, `.bin` extension.
pub fn sidecar_path(json_path: &Path) -> PathBuf {
    json_path.with_extension("bin")
}

/// Writes `json_path` and its `.bin` sidecar (source points, then target
/// points, packed little-endian `f64` triples).
pub fn write_instance(json_path: &Path, inst: &BenchmarkInstance) -> Result<(), IoError> {
    let bin = sidecar_path(json_path);
    let file_name = bin
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| IoError::Format("sidecar path has no file name".into()))?
        .to_string();
    let header = InstanceHeader {
        format: INSTANCE_FORMAT.into(),
        version: INSTANCE_VERSION,
        params: inst.params,
        ground_truth: inst.ground_truth,
        putative: inst.putative.iter().map(|a| [a.p_index, a.q_index]).collect(),
        inlier_mask: inst.inlier_mask.clone(),
        available_inliers: inst.available_inliers,
        noise_rejections: inst.noise_rejections,
        sidecar: SidecarLayout {
            file: file_name,
            encoding: "f64-le-xyz".into(),
            source_points: inst.source.len(),
            target_points: inst.target.len(),
        },
    };
    let mut bytes = encode_points_binary(&inst.source);
    bytes.extend(encode_points_binary(&inst.target));
    std::fs::write(&bin, bytes)?;
    let w = BufWriter::new(File::create(json_path)?);
    serde_json::to_writer_pretty(w, &header)?;
    Ok(())
}

pub fn read_instance(json_path: &Path) -> Result<BenchmarkInstance, IoError> {
    let header: InstanceHeader = serde_json::from_reader(BufReader::new(File::open(json_path)?))?;
    if header.format != INSTANCE_FORMAT || header.version != INSTANCE_VERSION {
        return Err(IoError::Format(format!(
            "unsupported instance format {} v{}",
            header.format, header.version
        )));
    }
    if header.sidecar.encoding != "f64-le-xyz" {
        return Err(IoError::Format(format!(
            "unsupported sidecar encoding {}",
            header.sidecar.encoding
        )));
    }
    let bin = json_path.with_file_name(&header.sidecar.file);
    let points = read_points_binary(&bin)?;
    let (ns, nt) = (header.sidecar.source_points, header.sidecar.target_points);
    if points.len() != ns + nt {
        return Err(IoError::Format(format!(
            "sidecar holds {} points, header declares {}",
            points.len(),
            ns + nt
        )));
    }
    if header.inlier_mask.len() != header.putative.len() {
        return Err(IoError::Format("inlier mask and putative set differ in length".into()));
    }
    let putative = AssociationSet::new(
        header
            .putative
            .iter()
            .map(|&[p, q]| Association::new(p, q))
            .collect(),
    )?;
    putative.validate_bounds(ns, nt)?;
    let mut source = points;
    let target = source.split_off(ns);
    Ok(BenchmarkInstance {
        params: header.params,
        source,
        target,
        putative,
        inlier_mask: header.inlier_mask,
        ground_truth: header.ground_truth,
        available_inliers: header.available_inliers,
        noise_rejections: header.noise_rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_synthetic;

    #[test]
    fn text_points_accept_whitespace_and_commas() {
        let src = "# header comment\n0 1 2\n\n3.5,4,-5e-1\n 6\t7  8 \n";
        let pts = parse_points(src.as_bytes()).unwrap();
        assert_eq!(
            pts,
            vec![Point3::new(0.0, 1.0, 2.0), Point3::new(3.5, 4.0, -0.5), Point3::new(6.0, 7.0, 8.0)]
        );
    }

    #[test]
    fn text_points_report_bad_lines() {
        let err = parse_points("0 1 2\n1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 2, .. }));
        let err = parse_points("0 x 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 1, .. }));
        assert!(parse_points("nan 0 0\n".as_bytes()).is_err());
    }

    #[test]
    fn binary_points() {
        let pts = vec![Point3::new(0.1, -2.0, 3e10), Point3::new(f64::MIN_POSITIVE, 0.0, 1.0)];
        let bytes = encode_points_binary(&pts);
        assert_eq!(bytes.len(), 48);
        assert_eq!(&bytes[..8], &0.1f64.to_le_bytes());
        assert_eq!(decode_points_binary(&bytes).unwrap(), pts);
        assert!(decode_points_binary(&bytes[..20]).is_err());
    }

    #[test]
    fn associations_with_and_without_header() {
        let a = parse_associations("p_index,q_index\n0,1\n2,3\n".as_bytes()).unwrap();
        assert_eq!(a, AssociationSet::from_pairs([(0, 1), (2, 3)]).unwrap());
        let b = parse_associations("0 1\n2 3\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert!(parse_associations("0,1\n-1,2\n".as_bytes()).is_err());
        assert!(parse_associations("0,1\n0,1\n".as_bytes()).is_err());
        assert!(parse_associations("0,1\nfoo,bar\n".as_bytes()).is_err());
    }

    #[test]
    fn matrix_csv_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.1, 1.0 / 3.0, 0.0, 6.065306597126334e-1, 1e-300]);
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 2);
        assert_eq!(parse_matrix_csv(buf.as_slice()).unwrap(), m);
        assert!(parse_matrix_csv("1,2\n3\n".as_bytes()).is_err());
    }

    #[test]
    fn instance_files() {
        let dir = tempfile::tempdir().unwrap();
        let inst = generate_synthetic(&SyntheticParams {
            outlier_rate: 0.8,
            seed: 5,
            ..SyntheticParams::default()
        })
        .unwrap();
        let path = dir.path().join("inst.json");
        write_instance(&path, &inst).unwrap();
        assert_eq!(
            std::fs::metadata(sidecar_path(&path)).unwrap().len() as usize,
            24 * (inst.source.len() + inst.target.len())
        );
        let back = read_instance(&path).unwrap();
        assert_eq!(back, inst);

        let header: serde_json::Value =
            serde_json::from_reader(File::open(&path).unwrap()).unwrap();
        assert_eq!(header["format"], INSTANCE_FORMAT);
        assert_eq!(header["sidecar"]["file"], "inst.bin");

        // truncated sidecar
        std::fs::write(sidecar_path(&path), vec![0u8; 24]).unwrap();
        assert!(matches!(read_instance(&path), Err(IoError::Format(_))));
    }

    #[test]
    fn file_helpers() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![Point3::new(0.25, 1.0, -3.0), Point3::new(1e-7, 2.0, 0.0)];
        let txt = dir.path().join("p.txt");
        let bin = dir.path().join("p.bin");
        write_points_text(&txt, &pts).unwrap();
        write_points_binary(&bin, &pts).unwrap();
        assert_eq!(read_points(&txt).unwrap(), pts);
        assert_eq!(read_points(&bin).unwrap(), pts);
        let a = AssociationSet::from_pairs([(0, 1), (1, 0)]).unwrap();
        let ap = dir.path().join("a.csv");
        write_associations(&ap, &a).unwrap();
        assert_eq!(read_associations(&ap).unwrap(), a);
    }
}
