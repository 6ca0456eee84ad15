//! CSV and JSON file formats.
//!
//! * lattice: CSV with header `x[,y[,z]]`, one site per row in site order,
//!   plus a JSON sidecar `{dim, side, n, delta, seed}`;
//! * coefficients: CSV `site_index,neighbor_index,coefficient` with 17
//!   significant digits;
//! * partition: CSV `site_index,bin_id`;
//! * sample: CSV with a single `value` column in site order.
//!
//! Floating-point values other than coefficients are written in Rust's
//! shortest round-trip form, so every file reads back bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lif_core::{Lattice, Partition, PreconditionerCoeffs};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const AXES: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeMeta {
    pub dim: usize,
    pub side: f64,
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
}

/// Sidecar path for a lattice CSV: `lattice.csv` → `lattice.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse<T: std::str::FromStr>(path: &Path, row: usize, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::format(path, format!("row {row}: cannot parse {field:?}")))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_lattice(path: &Path, lat: &Lattice, delta: f64, seed: u64) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(&AXES[..lat.dim()]).map_err(|e| Error::csv(path, e))?;
    for p in lat.points() {
        w.write_record(p.iter().map(|v| v.to_string())).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)?;
    let meta = LatticeMeta { dim: lat.dim(), side: lat.side(), n: lat.len(), delta, seed };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a lattice CSV and its sidecar.
pub fn read_lattice(path: &Path) -> Result<(Lattice, LatticeMeta)> {
    let meta_path = sidecar_path(path);
    let meta: LatticeMeta = read_json(&meta_path)?;
    let mut r = reader(path)?;
    let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    let dim = headers.len();
    if !(1..=3).contains(&dim) || headers.iter().zip(AXES).any(|(h, a)| h != a) {
        return Err(Error::format(path, format!("expected header x[,y[,z]], got {headers:?}")));
    }
    if dim != meta.dim {
        return Err(Error::format(&meta_path, format!("sidecar dim {} but CSV has {dim} columns", meta.dim)));
    }
    let mut coords = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        for field in rec.iter() {
            coords.push(parse::<f64>(path, row + 1, field)?);
        }
    }
    if coords.len() / dim != meta.n {
        return Err(Error::format(&meta_path, format!("sidecar n {} but CSV has {} rows", meta.n, coords.len() / dim)));
    }
    Ok((Lattice::from_coords(dim, meta.side, coords)?, meta))
}

pub fn write_coeffs(path: &Path, pc: &PreconditionerCoeffs) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["site_index", "neighbor_index", "coefficient"]).map_err(|e| Error::csv(path, e))?;
    for (s, t, a) in pc.triples() {
        w.write_record([s.to_string(), t.to_string(), format!("{a:.16e}")])
            .map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// Reads coefficients written by [`write_coeffs`]. Rows of one site must be
/// contiguous with the site itself first.
pub fn read_coeffs(path: &Path, m: usize, nu: f64, dim: usize) -> Result<PreconditionerCoeffs> {
    let mut r = reader(path)?;
    let mut records: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        if rec.len() != 3 {
            return Err(Error::format(path, format!("row {}: expected 3 fields", row + 1)));
        }
        let s: usize = parse(path, row + 1, &rec[0])?;
        let t: usize = parse(path, row + 1, &rec[1])?;
        let a: f64 = parse(path, row + 1, &rec[2])?;
        if s == records.len() {
            records.push((Vec::new(), Vec::new()));
        } else if s + 1 != records.len() {
            return Err(Error::format(path, format!("row {}: site {s} out of order", row + 1)));
        }
        let last = records.last_mut().expect("pushed above");
        last.0.push(t);
        last.1.push(a);
    }
    Ok(PreconditionerCoeffs::from_records(m, nu, dim, records)?)
}

pub fn write_partition(path: &Path, part: &Partition) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["site_index", "bin_id"]).map_err(|e| Error::csv(path, e))?;
    for (s, &b) in part.labels().iter().enumerate() {
        w.write_record([s.to_string(), b.to_string()]).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

pub fn read_partition(path: &Path) -> Result<Partition> {
    let mut r = reader(path)?;
    let mut labels = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let s: usize = parse(path, row + 1, rec.get(0).unwrap_or(""))?;
        if s != row {
            return Err(Error::format(path, format!("row {}: expected site {row}, got {s}", row + 1)));
        }
        labels.push(parse::<usize>(path, row + 1, rec.get(1).unwrap_or(""))?);
    }
    let b = labels.iter().max().map_or(0, |m| m + 1);
    Ok(Partition::from_labels(&labels, b)?)
}

pub fn write_sample(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["value"]).map_err(|e| Error::csv(path, e))?;
    for v in values {
        w.write_record([v.to_string()]).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

pub fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let mut r = reader(path)?;
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        out.push(parse::<f64>(path, row + 1, rec.get(0).unwrap_or(""))?);
    }
    Ok(out)
}
