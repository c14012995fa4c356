//! Trajectory store: `manifest.json` plus one field store per node for `y`
//! and for the cached Duhamel integrand.

use super::{Nonlinearity, SolutionTrajectory, SolverConfig};
use crate::error::{Error, Result};
use crate::gamma::GateReport;
use crate::spectral::store::{read_field, write_field};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub schema_version: u32,
    pub config: SolverConfig,
    pub times: Vec<f64>,
    pub iterations: usize,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub zp_norm: f64,
    pub forced: bool,
    pub gate: Option<GateReport>,
    pub nonlinearity: Nonlinearity,
    pub y: Vec<String>,
    pub integrand: Vec<String>,
}

fn stem(kind: &str, j: usize) -> String {
    format!("{kind}_{j:05}")
}

/// Writes the store and returns every file written.
pub fn write_trajectory(traj: &SolutionTrajectory, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut names = (Vec::new(), Vec::new());
    for j in 0..traj.mesh.nodes() {
        for (kind, field, list) in [("y", &traj.y[j], &mut names.0), ("F", &traj.integrand[j], &mut names.1)] {
            let s = stem(kind, j);
            let (h, b) = write_field(field, &dir.join(&s))?;
            files.extend([h, b]);
            list.push(s);
        }
    }
    let manifest = TrajectoryManifest {
        schema_version: SCHEMA_VERSION,
        config: traj.config.clone(),
        times: traj.mesh.times.clone(),
        iterations: traj.iterations,
        distances: traj.distances.clone(),
        ratios: traj.ratios.clone(),
        zp_norm: traj.zp_norm,
        forced: traj.forced,
        gate: traj.gate.clone(),
        nonlinearity: traj.nonlinearity,
        y: names.0,
        integrand: names.1,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
    files.push(path);
    Ok(files)
}

pub fn read_trajectory(dir: &Path) -> Result<SolutionTrajectory> {
    let m: TrajectoryManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!("trajectory schema {} unsupported", m.schema_version)));
    }
    let mesh = m.config.mesh()?;
    if mesh.times != m.times || m.y.len() != mesh.nodes() || m.integrand.len() != mesh.nodes() {
        return Err(Error::Format("trajectory manifest disagrees with its solver config".into()));
    }
    let load = |names: &[String]| names.iter().map(|s| read_field(&dir.join(s))).collect::<Result<Vec<_>>>();
    Ok(SolutionTrajectory {
        config: m.config,
        mesh,
        y: load(&m.y)?,
        integrand: load(&m.integrand)?,
        distances: m.distances,
        ratios: m.ratios,
        iterations: m.iterations,
        zp_norm: m.zp_norm,
        forced: m.forced,
        gate: m.gate,
        nonlinearity: m.nonlinearity,
    })
}
