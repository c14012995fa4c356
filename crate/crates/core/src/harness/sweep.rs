use super::pipeline::evaluate_gate;
use super::RunConfig;
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, RateFit};
use crate::roughpath::{gubinelli_integral, ControlledScalarPath, Partition, RoughPath};
use crate::solver::{picard_solve, random_bumps, weak_residual, zp_norm, PathGamma, SolveOptions, SolverConfig};
use crate::spectral::BoxGrid;
use crate::verifier::Window;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Dyadic partitions of the fine grid for a Gubinelli integral.
    Partition,
    /// Halving the solver mesh.
    SolverMesh,
    /// Doubling the modes per axis.
    Grid,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "partition" => Ok(SweepAxis::Partition),
            "solver-mesh" => Ok(SweepAxis::SolverMesh),
            "grid" => Ok(SweepAxis::Grid),
            _ => Err(Error::Config(vec![format!("sweep axis `{s}` is not one of partition, solver-mesh, grid")])),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Partition => "partition",
            SweepAxis::SolverMesh => "solver-mesh",
            SweepAxis::Grid => "grid",
        })
    }
}

/// Controlled path integrated in a partition sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepIntegrand {
    /// `Y ≡ 1`.
    One,
    /// `Y = β`, `Y' = I`.
    Beta,
    /// `Y^μ = sin β^μ`, `Y'^{μk} = δ_{μk} cos β^μ`.
    #[default]
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: usize,
    pub mesh: f64,
    pub residuals: Vec<f64>,
    pub norm: f64,
    /// Local log-log slope against the previous row (RMS over columns).
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
    /// Per-column fit of `log residual` against `log mesh`; `None` with fewer
    /// than two positive entries.
    pub fits: Vec<Option<RateFit>>,
}

impl SweepTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        let mut head = vec!["level".to_string(), "mesh".into()];
        head.extend(self.columns.iter().cloned());
        head.extend(["norm".into(), "rate".into()]);
        w.write_record(&head)?;
        for r in &self.rows {
            let mut rec = vec![r.level.to_string(), r.mesh.to_string()];
            rec.extend(r.residuals.iter().map(f64::to_string));
            rec.push(r.norm.to_string());
            rec.push(r.rate.map(|x| x.to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn finish(axis: SweepAxis, columns: Vec<String>, mut rows: Vec<SweepRow>) -> SweepTable {
    for i in 1..rows.len() {
        let (a, b) = (rms(&rows[i - 1].residuals), rms(&rows[i].residuals));
        if a > 0.0 && b > 0.0 {
            rows[i].rate = Some((a / b).ln() / (rows[i - 1].mesh / rows[i].mesh).ln());
        }
    }
    let fits = (0..columns.len())
        .map(|c| {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.mesh, r.residuals[c])).filter(|p| p.1 > 0.0).collect();
            if rows.len() >= 2 && rows.iter().all(|r| r.residuals[c] == 0.0) {
                Some(RateFit::exact_sentinel())
            } else if pts.len() >= 2 {
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                Some(loglog_fit(&x, &y))
            } else {
                None
            }
        })
        .collect();
    SweepTable { axis, columns, rows, fits }
}

fn field_bytes(n: usize) -> u64 {
    3 * (n as u64).pow(3) * 16
}

fn path_bytes(cfg: &RunConfig) -> u64 {
    let (j, n) = (cfg.roughpath.steps as u64, cfg.noise.channels.len() as u64);
    (j + 1) * n * 8 + j * n * n * 16 + (j + 1) * 16
}

/// Rough peak memory in bytes for a sweep.
pub fn estimate_bytes(cfg: &RunConfig, axis: SweepAxis, levels: usize) -> u64 {
    let top = levels.saturating_sub(1) as u32;
    match axis {
        SweepAxis::Partition => 2 * path_bytes(cfg) + (cfg.roughpath.steps as u64 + 1) * 8 * 8,
        SweepAxis::SolverMesh => path_bytes(cfg) + 6 * ((cfg.solver.steps as u64) * 2u64.saturating_pow(top) + 1) * field_bytes(cfg.grid.n),
        SweepAxis::Grid => {
            let n = (cfg.grid.n as u64).saturating_mul(2u64.saturating_pow(top));
            path_bytes(cfg) + (6 * (cfg.solver.steps as u64 + 1)).saturating_mul(3 * n.saturating_pow(3) * 16)
        }
    }
}

fn partition_sweep(cfg: &RunConfig, rp: &RoughPath, levels: usize) -> Result<SweepTable> {
    let w = Window::from_fractions(cfg.verifier.window[0], cfg.verifier.window[1], rp.grid())?;
    if w.len() % (1 << levels) != 0 {
        return Err(Error::PartitionNotNested(format!("window of {} steps is not divisible by 2^{levels}", w.len())));
    }
    let n = rp.channels();
    let y = match cfg.sweep.integrand {
        super::SweepIntegrand::One => ControlledScalarPath::from_fn(rp, w.start, w.end, 1, |_| vec![1.0], |_| vec![0.0; n])?,
        super::SweepIntegrand::Beta => ControlledScalarPath::from_fn(
            rp,
            w.start,
            w.end,
            n,
            |j| rp.path().values_at(j),
            |_| (0..n * n).map(|e| if e / n == e % n { 1.0 } else { 0.0 }).collect(),
        )?,
        super::SweepIntegrand::Smooth => ControlledScalarPath::from_fn(
            rp,
            w.start,
            w.end,
            n,
            |j| rp.path().values_at(j).iter().map(|b| b.sin()).collect(),
            |j| {
                let b = rp.path().values_at(j);
                (0..n * n).map(|e| if e / n == e % n { b[e / n].cos() } else { 0.0 }).collect()
            },
        )?,
    };
    let reference = gubinelli_integral(&y, rp, &Partition::dyadic(w.start, w.end, 1)?)?;
    let norm = reference.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rows = (1..=levels)
        .map(|l| {
            let step = 1 << (levels + 1 - l);
            let part = Partition::dyadic(w.start, w.end, step)?;
            let i = gubinelli_integral(&y, rp, &part)?;
            let d = i.iter().zip(&reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            Ok(SweepRow { level: l - 1, mesh: part.mesh(rp), residuals: vec![d], norm, rate: None })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(SweepAxis::Partition, vec!["difference".into()], rows))
}

fn solve_level(cfg: &RunConfig, solver: &SolverConfig, grid: BoxGrid, rp: &RoughPath) -> Result<(Vec<f64>, f64)> {
    let noise = cfg.noise_model_on(grid)?;
    let u0 = cfg.initial_datum_on(grid)?;
    let gate = evaluate_gate(cfg, &noise, &u0, rp)?.1;
    let gamma = PathGamma::new(noise, rp.path().clone())?;
    let opts = SolveOptions { force: cfg.force, nonlinearity: cfg.nonlinearity };
    let traj = picard_solve(solver, &u0, &gamma, Some(&gate), opts)?;
    let phis = random_bumps(grid, cfg.verifier.phis, cfg.verifier.bump_order, cfg.verifier.phi_seed)?;
    Ok((weak_residual(&traj, &phis, traj.mesh.steps)?, zp_norm(&traj, solver.p)?))
}

/// Refinement table along one axis. Each row is one level; rows run from
/// coarse to fine, and the rate column compares with the previous row.
pub fn sweep(cfg: &RunConfig, axis: SweepAxis, levels: usize) -> Result<SweepTable> {
    cfg.validate()?;
    if levels == 0 {
        return Err(Error::Config(vec!["sweep levels must be at least 1".into()]));
    }
    let estimate = estimate_bytes(cfg, axis, levels);
    if estimate > cfg.sweep.memory_cap_bytes {
        return Err(Error::ResourceGuard { estimate, cap: cfg.sweep.memory_cap_bytes });
    }
    let rp = cfg.rough_path()?;
    let phi_cols = || (0..cfg.verifier.phis).map(|k| format!("phi{k}")).collect::<Vec<_>>();
    match axis {
        SweepAxis::Partition => partition_sweep(cfg, &rp, levels),
        SweepAxis::SolverMesh => {
            let grid = cfg.box_grid()?;
            let rows = (0..levels)
                .map(|l| {
                    let solver = SolverConfig { steps: cfg.solver.steps << l, ..cfg.solver.clone() };
                    let (res, norm) = solve_level(cfg, &solver, grid, &rp)?;
                    Ok(SweepRow { level: l, mesh: solver.horizon / solver.steps as f64, residuals: res, norm, rate: None })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(finish(axis, phi_cols(), rows))
        }
        SweepAxis::Grid => {
            let rows = (0..levels)
                .map(|l| {
                    let grid = BoxGrid::new(cfg.grid.side, cfg.grid.n << l)?;
                    let (res, norm) = solve_level(cfg, &cfg.solver, grid, &rp)?;
                    Ok(SweepRow { level: l, mesh: grid.dx(), residuals: res, norm, rate: None })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(finish(axis, phi_cols(), rows))
        }
    }
}
