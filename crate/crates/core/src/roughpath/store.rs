//! Two-file rough-path store: `header.json` plus `values.csv`.
//!
//! CSV columns are `t, beta_1..beta_N, B_1_1..B_N_N` (row-major tensor of the
//! interval starting at that node). The last row leaves the tensor columns
//! empty. Floats are written in shortest round-trip form, so a store written
//! from a lattice path reads back bit-identically.

use super::{DrivingPath, FineTimeGrid, Flavor, RoughPath, LEVEL2_UNIT, QUANTUM};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;
pub const HEADER_FILE: &str = "header.json";
pub const VALUES_FILE: &str = "values.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoughPathHeader {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(rename = "N")]
    pub channels: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "J")]
    pub steps: usize,
    pub alpha: f64,
    pub flavor: Flavor,
}

pub fn header_of(rp: &RoughPath) -> RoughPathHeader {
    RoughPathHeader {
        schema_version: SCHEMA_VERSION,
        seed: rp.path().seed(),
        channels: rp.channels(),
        horizon: rp.grid().horizon(),
        steps: rp.grid().steps(),
        alpha: rp.alpha(),
        flavor: rp.flavor(),
    }
}

pub fn write_values<W: std::io::Write>(rp: &RoughPath, out: W) -> Result<()> {
    let n = rp.channels();
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["t".to_string()];
    head.extend((1..=n).map(|i| format!("beta_{i}")));
    for i in 1..=n {
        for k in 1..=n {
            head.push(format!("B_{i}_{k}"));
        }
    }
    w.write_record(&head)?;
    let steps = rp.grid().steps();
    for j in 0..=steps {
        let mut row = vec![format!("{}", rp.grid().time(j))];
        row.extend((0..n).map(|i| format!("{}", rp.path().value(j, i))));
        for e in 0..n * n {
            if j < steps {
                row.push(format!("{}", rp.interval_tensors()[j * n * n + e] as f64 * LEVEL2_UNIT));
            } else {
                row.push(String::new());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_store(rp: &RoughPath, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(HEADER_FILE), serde_json::to_vec_pretty(&header_of(rp))?)?;
    let f = std::fs::File::create(dir.join(VALUES_FILE))?;
    write_values(rp, std::io::BufWriter::new(f))
}

fn parse(field: &str, what: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad {what} value `{field}`")))
}

pub fn read_store(dir: &Path) -> Result<RoughPath> {
    let header: RoughPathHeader = serde_json::from_slice(&std::fs::read(dir.join(HEADER_FILE))?)?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!("unsupported schema version {}", header.schema_version)));
    }
    let grid = FineTimeGrid::new(header.horizon, header.steps)?;
    let n = header.channels;
    let mut rdr = csv::Reader::from_path(dir.join(VALUES_FILE))?;
    let cols = rdr.headers()?.len();
    if cols != 1 + n + n * n {
        return Err(Error::Format(format!("expected {} columns, found {cols}", 1 + n + n * n)));
    }
    let mut lattice = Vec::with_capacity(grid.nodes() * n);
    let mut tensors = Vec::with_capacity(grid.steps() * n * n);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if rows > grid.steps() {
            return Err(Error::Format("more rows than grid nodes".into()));
        }
        let t = parse(&rec[0], "t")?;
        if (t - grid.time(rows)).abs() > 1e-12 * grid.horizon() {
            return Err(Error::Format(format!("row {rows}: time {t} off the grid")));
        }
        for i in 0..n {
            lattice.push((parse(&rec[1 + i], "beta")? / QUANTUM).round() as i64);
        }
        if rows < grid.steps() {
            for e in 0..n * n {
                tensors.push((parse(&rec[1 + n + e], "tensor")? / LEVEL2_UNIT).round() as i128);
            }
        } else if (0..n * n).any(|e| !rec[1 + n + e].trim().is_empty()) {
            return Err(Error::Format("last row must leave tensor columns empty".into()));
        }
        rows += 1;
    }
    if rows != grid.nodes() {
        return Err(Error::Format(format!("expected {} rows, found {rows}", grid.nodes())));
    }
    let path = DrivingPath::from_lattice(grid, n, header.seed, lattice)?;
    RoughPath::from_parts(path, header.flavor, header.alpha, tensors)
}
