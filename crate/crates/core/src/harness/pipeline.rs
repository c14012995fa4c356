use super::{RunConfig, Stage};
use crate::error::{Error, Result};
use crate::gamma::{eta_series, smallness_gate, threshold_check, EtaSeries, GateReport, NoiseModel};
use crate::roughpath::{store as rp_store, RoughPath};
use crate::solver::{picard_solve, store as traj_store, zp_weights, PathGamma, SolutionTrajectory, SolveOptions};
use crate::spectral::{lp_norm, partial_derivative, SpectralField};
use crate::verifier::run_verification;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactDigest {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub seconds: f64,
    pub artifacts: Vec<ArtifactDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    pub threads: usize,
    pub stages: Vec<StageRecord>,
    pub complete: bool,
}

impl RunManifest {
    /// `(path, sha256)` for every artifact, in stage order.
    pub fn digests(&self) -> Vec<(String, String)> {
        self.stages.iter().flat_map(|s| s.artifacts.iter().map(|a| (a.path.clone(), a.sha256.clone()))).collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn digest_file(root: &Path, path: &Path) -> Result<ArtifactDigest> {
    let bytes = std::fs::read(path)?;
    let rel = path.strip_prefix(root).unwrap_or(path);
    let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
    Ok(ArtifactDigest { path: rel, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
}

#[derive(Default)]
struct Context {
    noise: Option<NoiseModel>,
    u0: Option<SpectralField>,
    rp: Option<RoughPath>,
    gate: Option<GateReport>,
    traj: Option<SolutionTrajectory>,
}

impl Context {
    fn noise(&mut self, cfg: &RunConfig) -> Result<NoiseModel> {
        if self.noise.is_none() {
            self.noise = Some(cfg.noise_model()?);
        }
        Ok(self.noise.clone().unwrap())
    }

    fn u0(&mut self, cfg: &RunConfig) -> Result<SpectralField> {
        if self.u0.is_none() {
            self.u0 = Some(cfg.initial_datum()?);
        }
        Ok(self.u0.clone().unwrap())
    }

    fn rough_path(&mut self, cfg: &RunConfig) -> Result<RoughPath> {
        if self.rp.is_none() {
            let s = cfg.roughpath.store.as_ref().ok_or_else(|| Error::InvalidArgument("no rough path: run enhance or set roughpath.store".into()))?;
            self.rp = Some(rp_store::read_store(Path::new(s))?);
        }
        Ok(self.rp.clone().unwrap())
    }
}

/// `η̄` series and the gate report for the configured datum.
pub fn evaluate_gate(cfg: &RunConfig, noise: &NoiseModel, u0: &SpectralField, rp: &RoughPath) -> Result<(EtaSeries, GateReport)> {
    let eta = eta_series(noise, rp.path(), cfg.solver.p, cfg.solver.q, cfg.noise.eta_stride)?;
    let gate = smallness_gate(u0, eta.sup(), cfg.solver.c_star, threshold_check(noise))?;
    Ok((eta, gate))
}

pub fn write_gate(dir: &Path, eta: &EtaSeries, gate: &GateReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join("gate.json");
    std::fs::write(&json, serde_json::to_vec_pretty(gate)?)?;
    let csv_path = dir.join("eta.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["t", "eta_bound", "eta_exact_l2", "running_sup"])?;
    for ((t, v), s) in eta.times.iter().zip(&eta.values).zip(&eta.running_sup) {
        w.write_record([t.to_string(), v.bound.to_string(), v.exact_l2.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(vec![json, csv_path])
}

/// `diagnostics.csv` (per-node norms) and `ratios.csv` (per Picard iteration).
pub fn write_diagnostics(dir: &Path, traj: &SolutionTrajectory) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let p = traj.config.p;
    let (a, b) = zp_weights(p);
    let rows: Vec<[f64; 4]> = traj
        .mesh
        .times
        .par_iter()
        .zip(traj.y.par_iter())
        .map(|(&t, y)| {
            let lp = lp_norm(&y.to_physical(), p)?;
            let mut grad = 0.0f64;
            for axis in 0..3 {
                grad = grad.max(lp_norm(&partial_derivative(y, axis).to_physical(), p)?);
            }
            Ok([t, lp, t.powf(a) * lp, t.powf(b) * grad])
        })
        .collect::<Result<_>>()?;
    let diag = dir.join("diagnostics.csv");
    let mut w = csv::Writer::from_path(&diag)?;
    w.write_record(["t", "y_lp", "weighted_y_lp", "weighted_grad_lp"])?;
    for r in rows {
        w.write_record(r.map(|x| x.to_string()))?;
    }
    w.flush()?;
    let ratios = dir.join("ratios.csv");
    let mut w = csv::Writer::from_path(&ratios)?;
    w.write_record(["iteration", "distance", "ratio"])?;
    for (i, d) in traj.distances.iter().enumerate() {
        let r = if i == 0 { String::new() } else { traj.ratios[i - 1].to_string() };
        w.write_record([(i + 1).to_string(), d.to_string(), r])?;
    }
    w.flush()?;
    Ok(vec![diag, ratios])
}

fn run_stage(stage: Stage, cfg: &RunConfig, ctx: &mut Context, files: &mut Vec<PathBuf>) -> Result<()> {
    let out = &cfg.output;
    match stage {
        Stage::Enhance => {
            let rp = cfg.sample_rough_path()?;
            let dir = out.join("roughpath");
            rp_store::write_store(&rp, &dir)?;
            files.extend([dir.join(rp_store::HEADER_FILE), dir.join(rp_store::VALUES_FILE)]);
            ctx.rp = Some(rp);
        }
        Stage::Gate => {
            let (noise, u0, rp) = (ctx.noise(cfg)?, ctx.u0(cfg)?, ctx.rough_path(cfg)?);
            let (eta, gate) = evaluate_gate(cfg, &noise, &u0, &rp)?;
            files.extend(write_gate(out, &eta, &gate)?);
            let failed = !gate.pass;
            ctx.gate = Some(gate.clone());
            if failed && !cfg.force {
                return Err(Error::GateFailed { product: gate.product, c_star: gate.c_star });
            }
        }
        Stage::Simulate => {
            let (noise, u0, rp) = (ctx.noise(cfg)?, ctx.u0(cfg)?, ctx.rough_path(cfg)?);
            if ctx.gate.is_none() {
                ctx.gate = Some(evaluate_gate(cfg, &noise, &u0, &rp)?.1);
            }
            let gamma = PathGamma::new(noise, rp.path().clone())?;
            let opts = SolveOptions { force: cfg.force, nonlinearity: cfg.nonlinearity };
            let traj = picard_solve(&cfg.solver, &u0, &gamma, ctx.gate.as_ref(), opts)?;
            files.extend(traj_store::write_trajectory(&traj, &out.join("trajectory"))?);
            files.extend(write_diagnostics(out, &traj)?);
            ctx.traj = Some(traj);
        }
        Stage::Verify => {
            let (noise, rp) = (ctx.noise(cfg)?, ctx.rough_path(cfg)?);
            let traj = ctx.traj.as_ref().ok_or_else(|| Error::InvalidArgument("verify needs a simulated trajectory".into()))?;
            let report = run_verification(traj, &noise, &rp, &cfg.verifier)?;
            let (json, csv) = report.write(&out.join("report.json"))?;
            files.extend([json, csv]);
            if !report.pass {
                return Err(Error::VerificationFailed(report.failures()));
            }
        }
    }
    Ok(())
}

fn write_manifest(cfg: &RunConfig, m: &RunManifest) -> Result<()> {
    std::fs::write(cfg.output.join(MANIFEST_FILE), serde_json::to_vec_pretty(m)?)?;
    Ok(())
}

/// Runs the configured stages in order. On failure the partial manifest is
/// still written and the error carries the stage name.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output)?;
    let mut manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        // The output location is not part of what a run computes.
        config_digest: sha256_hex(&serde_json::to_vec(&RunConfig { output: PathBuf::new(), ..cfg.clone() })?),
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        stages: Vec::new(),
        complete: false,
    };
    let mut ctx = Context::default();
    for &stage in &cfg.stages {
        let clock = Instant::now();
        let mut files = Vec::new();
        let outcome = run_stage(stage, cfg, &mut ctx, &mut files);
        let artifacts = files.iter().map(|f| digest_file(&cfg.output, f)).collect::<Result<Vec<_>>>()?;
        let record = StageRecord {
            stage,
            status: if outcome.is_ok() { StageStatus::Ok } else { StageStatus::Failed },
            seconds: clock.elapsed().as_secs_f64(),
            artifacts,
            error: outcome.as_ref().err().map(|e| e.to_string()),
        };
        manifest.stages.push(record);
        if let Err(e) = outcome {
            write_manifest(cfg, &manifest)?;
            return Err(Error::Stage { stage: stage.to_string(), source: Box::new(e) });
        }
    }
    manifest.complete = true;
    write_manifest(cfg, &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::tests::small;
    use crate::harness::{exit_code, with_threads};

    #[test]
    fn empty_stage_list_gives_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.stages.clear();
        let m = run_pipeline(&cfg).unwrap();
        assert!(m.stages.is_empty() && m.complete);
        assert!(dir.path().join(MANIFEST_FILE).exists());
    }

    #[test]
    fn enhance_only_is_reproducible() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let run = |d: &Path, threads| {
            let mut cfg = small(d);
            cfg.stages = vec![Stage::Enhance];
            with_threads(threads, || run_pipeline(&cfg)).unwrap().unwrap()
        };
        let (ma, mb) = (run(a.path(), 1), run(b.path(), 2));
        assert_eq!(ma.digests(), mb.digests());
        assert_eq!(ma.config_digest, mb.config_digest);
        assert_eq!(ma.config_digest.len(), 64);
        assert_eq!(ma.digests().len(), 2);
    }

    #[test]
    fn gate_failure_halts_with_partial_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.initial = crate::harness::InitialConfig::Smooth { seed: 1, norm: 1.0, max_mode: 2 };
        let e = run_pipeline(&cfg).unwrap_err();
        assert_eq!(exit_code(&e), 3);
        assert!(matches!(&e, Error::Stage { stage, .. } if stage == "gate"));
        let m: RunManifest = serde_json::from_slice(&std::fs::read(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert!(!m.complete);
        assert_eq!(m.stages.len(), 2);
        assert_eq!(m.stages[1].status, StageStatus::Failed);
        assert_eq!(m.stages[1].artifacts.len(), 2, "gate report is still written");
    }

    #[test]
    fn full_small_pipeline_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let m = run_pipeline(&cfg).unwrap();
        assert!(m.complete);
        let report: crate::verifier::VerificationReport = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
        assert!(report.pass);
        for name in ["chen", "ito_stratonovich"] {
            assert!(report.check(name).unwrap().pass, "{name}");
        }
        for f in ["diagnostics.csv", "ratios.csv", "gate.json", "eta.csv", "trajectory/manifest.json"] {
            assert!(m.digests().iter().any(|(p, _)| p == f), "{f} not in manifest");
        }
    }
}
