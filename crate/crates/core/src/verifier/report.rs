//! Runs every check against one trajectory and rough path and collects the
//! outcome as JSON plus a CSV of refinement tables.

use super::*;
use crate::roughpath::Flavor;
use crate::solver::{random_bumps, weak_residual};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifierConfig {
    pub phis: usize,
    pub bump_order: usize,
    pub phi_seed: u64,
    /// Window as fractions of the horizon.
    pub window: [f64; 2],
    pub partition_levels: usize,
    /// Sub-windows averaged in the partition-refinement study.
    pub pieces: usize,
    pub taylor_levels: usize,
    pub eq22_windows: usize,
    pub eq22_min_steps: usize,
    pub chen_triples: usize,
    pub check_seed: u64,
    /// Largest admissible log-log fit residual.
    pub fit_residual_max: f64,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            phis: 5,
            bump_order: 2,
            phi_seed: 17,
            window: [0.25, 0.75],
            partition_levels: 5,
            pieces: 16,
            taylor_levels: 5,
            eq22_windows: 20,
            eq22_min_steps: 256,
            chen_triples: 100,
            check_seed: 23,
            fit_residual_max: 0.5,
        }
    }
}

impl VerifierConfig {
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.phis == 0 {
            out.push("verifier.phis must be at least 1".into());
        }
        if self.bump_order == 0 {
            out.push("verifier.bump_order must be at least 1".into());
        }
        let [a, b] = self.window;
        if !(a > 0.0 && a < b && b <= 1.0) {
            out.push(format!("verifier.window = [{a}, {b}] must satisfy 0 < a < b <= 1"));
        }
        if self.partition_levels < 2 {
            out.push("verifier.partition_levels must be at least 2".into());
        }
        if self.pieces == 0 {
            out.push("verifier.pieces must be at least 1".into());
        }
        if self.taylor_levels < 2 {
            out.push("verifier.taylor_levels must be at least 2".into());
        }
        if !(self.fit_residual_max > 0.0) {
            out.push("verifier.fit_residual_max must be positive".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<RateFit>,
    /// `(mesh, value)` rows for refinement studies.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<(f64, f64)>,
    pub pass: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>, values: &[(&str, f64)], pass: bool) -> Self {
        let values = values.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self { name: name.into(), values, fit: None, table: Vec::new(), pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub inputs_digest: String,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect()
    }

    /// Writes `path` and a `.csv` companion; returns both paths.
    pub fn write(&self, path: &Path) -> Result<(PathBuf, PathBuf)> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        let csv_path = path.with_extension("csv");
        let mut w = csv::Writer::from_path(&csv_path)?;
        w.write_record(["check", "level", "mesh", "value"])?;
        for c in &self.checks {
            for (l, (m, v)) in c.table.iter().enumerate() {
                w.write_record([c.name.clone(), l.to_string(), format!("{m:e}"), format!("{v:e}")])?;
            }
        }
        w.flush()?;
        Ok((path.to_path_buf(), csv_path))
    }
}

fn digest_inputs(traj: &SolutionTrajectory, rp: &RoughPath) -> String {
    let mut h = Sha256::new();
    for y in &traj.y {
        h.update(crate::spectral::store::encode(y));
    }
    for v in rp.path().lattice() {
        h.update(v.to_le_bytes());
    }
    for v in rp.interval_tensors() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn fit_ok(fit: &RateFit, max_residual: f64) -> bool {
    !fit.is_sentinel() && fit.slope > 0.0 && fit.residual < max_residual
}

pub fn run_verification(traj: &SolutionTrajectory, noise: &NoiseModel, rp: &RoughPath, cfg: &VerifierConfig) -> Result<VerificationReport> {
    let d = cfg.diagnostics();
    if !d.is_empty() {
        return Err(Error::Config(d));
    }
    if rp.flavor() != Flavor::Ito {
        return Err(Error::FlavorMismatch("the rough weak form is checked against the Itô enhancement".into()));
    }
    let grid = rp.grid();
    let window = Window::from_fractions(cfg.window[0], cfg.window[1], grid)?;
    let phis = random_bumps(noise.grid, cfg.phis, cfg.bump_order, cfg.phi_seed)?;
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.check_seed);

    let mut chen = 0.0f64;
    for _ in 0..cfg.chen_triples {
        let mut t = [0; 3].map(|_| rng.random_range(0..=grid.steps()));
        t.sort_unstable();
        if t[0] < t[1] && t[1] < t[2] {
            chen = chen.max(rp.chen_defect_nodes(t[0], t[1], t[2]).iter().fold(0.0, |m, x| m.max(x.abs())));
        }
    }
    checks.push(CheckResult::new("chen", &[("max_defect", chen)], chen == 0.0));

    let strat = rp.with_flavor(Flavor::Stratonovich);
    let windows = random_windows(grid.steps(), cfg.eq22_windows, cfg.eq22_min_steps.min(grid.steps()), cfg.check_seed);
    let ids = ito_strat_identities(rp, &strat, &windows)?;
    let worst_gap = ids.windows.iter().map(|w| w.qv_gap.iter().fold(0.0f64, |m, &x| m.max(x / w.tolerance))).fold(0.0, f64::max);
    checks.push(CheckResult::new(
        "ito_stratonovich",
        &[("eq24_max", ids.eq24_max), ("eq22_worst_gap_over_tolerance", worst_gap)],
        ids.pass,
    ));

    for (k, phi) in phis.iter().enumerate() {
        let obs = build_observable(traj, noise, rp, phi, window)?;
        let r = residual_refinement(traj, noise, rp, phi, window, cfg.partition_levels, cfg.pieces)?;
        let ok = r.residuals.iter().all(|x| x.is_finite()) && fit_ok(&r.fit, cfg.fit_residual_max);
        let mut c = CheckResult::new(format!("rough_weak_residual/phi{k}"), &[("full_window", r.full_window), ("finest_rms", r.finest())], ok);
        c.fit = Some(r.fit);
        c.table = r.meshes.iter().copied().zip(r.residuals.iter().copied()).collect();
        checks.push(c);

        let q = remainder_quotients(&obs, rp, rp.alpha())?;
        let ok = q.remainder.is_finite() && q.derivative.is_finite();
        checks.push(CheckResult::new(format!("remainder_quotients/phi{k}"), &[("remainder", q.remainder), ("derivative", q.derivative)], ok));

        let j = j_decomposition_check(traj, noise, rp, phi, window)?;
        let ok = j.residual.is_finite() && j.cross_term.is_finite();
        checks.push(CheckResult::new(
            format!("j_decomposition/phi{k}"),
            &[("direct", j.direct), ("residual", j.residual), ("cross_term", j.cross_term)],
            ok,
        ));

        let jump = observable_continuity(traj, noise, rp, phi)?;
        checks.push(CheckResult::new(format!("observable_continuity/phi{k}"), &[("max_jump", jump)], jump.is_finite()));
    }

    let t = taylor_rate(noise, rp, &phis[0], window, cfg.taylor_levels)?;
    let mut c = CheckResult::new("delta_gamma_taylor", &[("slope", t.fit.slope)], t.fit.slope > 1.0);
    c.fit = Some(t.fit);
    c.table = t.lengths.iter().copied().zip(t.rms_defects.iter().copied()).collect();
    checks.push(c);

    let times = [grid.time(window.start), grid.time(window.end)];
    let ic = integrand_continuity_check(traj, times[0], times[1])?;
    checks.push(CheckResult::new("integrand_continuity", &[("quotient", ic)], ic.is_finite()));

    let wr = weak_residual(traj, &phis, traj.mesh.steps)?;
    let worst = wr.iter().copied().fold(0.0, f64::max);
    checks.push(CheckResult::new("weak_residual", &[("max", worst)], worst.is_finite()));

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        inputs_digest: digest_inputs(traj, rp),
        checks,
        pass,
        notes: vec!["test functions are periodic band-limited bumps standing in for compactly supported smooth functions".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{picard_solve, tests as st, PathGamma, SolveOptions};
    use crate::spectral::lp_norm_spectral;
    use crate::verifier::tests::rough;

    #[test]
    fn small_data_run_verifies() {
        let g = st::grid();
        let rp = rough(11, 4096);
        let noise = st::noise(g);
        let gamma = PathGamma::new(noise.clone(), rp.path().clone()).unwrap();
        let base = st::smooth_field(g, 1);
        let u0 = base.scale(1e-3 / lp_norm_spectral(&base, 1.5).unwrap());
        let traj = picard_solve(&st::cfg(64), &u0, &gamma, None, SolveOptions::default()).unwrap();
        let cfg = VerifierConfig { phis: 2, ..Default::default() };
        let report = run_verification(&traj, &noise, &rp, &cfg).unwrap();
        assert!(report.pass, "{:#?}", report.checks);
        let dir = tempfile::tempdir().unwrap();
        let (json, csv) = report.write(&dir.path().join("report.json")).unwrap();
        assert!(json.exists() && csv.exists());
        assert_eq!(report.inputs_digest.len(), 64);
    }

    #[test]
    fn config_diagnostics() {
        let bad = VerifierConfig { phis: 0, window: [0.0, 0.5], partition_levels: 1, ..Default::default() };
        assert_eq!(bad.diagnostics().len(), 3);
        assert!(VerifierConfig::default().diagnostics().is_empty());
    }
}
