//! Picard iteration for the transformed mild equation
//! `y_t = e^{tΔ}U₀ + ∫₀ᵗ e^{(t−s)Δ} Γ_s⁻¹ M(Γ_s y_s) ds` on a graded time mesh.

mod norms;
mod quadrature;
pub mod store;
mod weak;

pub use norms::{zp_distance, zp_eps_seminorm, zp_norm, zp_norm_of, zp_weights};
pub use quadrature::{cumulative_scalar, duhamel_quadrature, HeatFactor};
pub use weak::{band_limited_bump, random_bumps, weak_residual};

use crate::error::{Error, Result};
use crate::gamma::{apply_gamma, build_gamma, conjugate_exponent, Direction, GammaOperator, GateReport, NoiseModel};
use crate::roughpath::DrivingPath;
use crate::spectral::{heat_semigroup, nonlinearity, BoxGrid, SpectralField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn default_tolerance() -> f64 {
    1e-8
}

fn default_max_iterations() -> usize {
    50
}

fn default_c_star() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub p: f64,
    pub q: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub horizon: f64,
    /// `J_q`: the mesh is `t_j = T (j/J_q)²`, `j = 0..=J_q`.
    pub steps: usize,
    /// Picard stops once the `Z_p` distance of successive iterates falls
    /// below `tolerance · ‖e^{·Δ}U₀‖_{Z_p}`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_c_star")]
    pub c_star: f64,
    /// Power used for the first Duhamel cell; defaults to `−5/2 + 3/p`.
    #[serde(default)]
    pub singular_exponent: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 1.8,
            q: conjugate_exponent(1.8),
            epsilon: 0.05,
            alpha: 0.4,
            horizon: 1.0,
            steps: 64,
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            c_star: default_c_star(),
            singular_exponent: None,
        }
    }
}

impl SolverConfig {
    /// `1/2 − 3/(4p)`.
    pub fn epsilon_cap(&self) -> f64 {
        0.5 - 0.75 / self.p
    }

    pub fn exponent(&self) -> f64 {
        self.singular_exponent.unwrap_or(-2.5 + 3.0 / self.p)
    }

    /// Every violated constraint, one message each.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.p > 1.5 && self.p < 2.0) {
            out.push(format!("solver.p = {} must lie in (3/2, 2)", self.p));
        }
        if !((1.0 / self.q - (2.0 / self.p - 1.0 / 3.0)).abs() <= 1e-12) {
            out.push(format!("solver.q = {} violates 1/q = 2/p − 1/3 (expected {})", self.q, conjugate_exponent(self.p)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.epsilon_cap()) {
            out.push(format!("solver.epsilon = {} must lie in (0, 1/2 − 3/(4p)) = (0, {})", self.epsilon, self.epsilon_cap()));
        }
        if !(self.alpha > 1.0 / 3.0 && self.alpha < 0.5) {
            out.push(format!("solver.alpha = {} must lie in (1/3, 1/2)", self.alpha));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            out.push(format!("solver.horizon = {} must be positive", self.horizon));
        }
        if self.steps < 2 {
            out.push(format!("solver.steps = {} must be at least 2", self.steps));
        }
        if !(self.tolerance > 0.0) {
            out.push(format!("solver.tolerance = {} must be positive", self.tolerance));
        }
        if self.max_iterations == 0 {
            out.push("solver.max_iterations must be at least 1".into());
        }
        if !(self.c_star > 0.0) {
            out.push(format!("solver.c_star = {} must be positive", self.c_star));
        }
        if !(self.exponent() > -1.0) {
            out.push(format!("solver.singular_exponent = {} is not integrable at 0", self.exponent()));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() { Ok(()) } else { Err(Error::Config(d)) }
    }

    pub fn mesh(&self) -> Result<SolverMesh> {
        SolverMesh::graded(self.horizon, self.steps)
    }
}

/// Graded nodes `t_j = T (j/J)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMesh {
    pub horizon: f64,
    pub steps: usize,
    pub times: Vec<f64>,
}

impl SolverMesh {
    pub fn graded(horizon: f64, steps: usize) -> Result<Self> {
        if steps < 2 || !(horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("graded mesh needs J >= 2 and T > 0, got J={steps}, T={horizon}")));
        }
        let j = steps as f64;
        let times = (0..=steps).map(|k| horizon * (k as f64 / j).powi(2)).collect();
        Ok(Self { horizon, steps, times })
    }

    pub fn nodes(&self) -> usize {
        self.times.len()
    }

    /// Weight of the left-point rule in `σ = √(s/T)` on `[t_k, t_{k+1}]`.
    pub fn rectangle_weight(&self, k: usize) -> f64 {
        2.0 * self.horizon * k as f64 / (self.steps as f64).powi(2)
    }

    /// `∫₀^{t₁} (s/t₁)^γ ds`, applied to the sample at `t₁`.
    pub fn first_cell_weight(&self, exponent: f64) -> f64 {
        self.times[1] / (1.0 + exponent)
    }

    /// Nodes with `s <= t_j <= t`.
    pub fn window(&self, s: f64, t: f64) -> Vec<usize> {
        (0..self.nodes()).filter(|&j| self.times[j] >= s && self.times[j] <= t).collect()
    }
}

/// Supplies `Γ_t` at arbitrary times in `[0, T]`.
pub trait GammaProvider: Sync {
    fn grid(&self) -> BoxGrid;
    fn operator(&self, t: f64) -> Result<GammaOperator>;
}

/// `Γ ≡ I`: the deterministic equation.
pub struct IdentityGamma(pub BoxGrid);

impl GammaProvider for IdentityGamma {
    fn grid(&self) -> BoxGrid {
        self.0
    }

    fn operator(&self, t: f64) -> Result<GammaOperator> {
        let one = vec![num_complex::Complex64::new(1.0, 0.0); self.0.len()];
        Ok(GammaOperator { time: t, grid: self.0, forward: one.clone(), inverse: one })
    }
}

/// `Γ_t` from a sampled path, with `β` linear between fine nodes.
#[derive(Debug, Clone)]
pub struct PathGamma {
    pub noise: NoiseModel,
    pub path: DrivingPath,
}

impl PathGamma {
    pub fn new(noise: NoiseModel, path: DrivingPath) -> Result<Self> {
        if noise.len() != path.channels() {
            return Err(Error::InvalidArgument(format!("{} noise channels, {} path channels", noise.len(), path.channels())));
        }
        Ok(Self { noise, path })
    }

    pub fn beta_at(&self, t: f64) -> Result<Vec<f64>> {
        let g = self.path.grid();
        if !(t >= 0.0 && t <= g.horizon() * (1.0 + 1e-15)) {
            return Err(Error::InvalidArgument(format!("time {t} outside [0, {}]", g.horizon())));
        }
        let x = t / g.dt();
        let j = (x.floor() as usize).min(g.steps() - 1);
        let w = x - j as f64;
        let (a, b) = (self.path.values_at(j), self.path.values_at(j + 1));
        Ok(if w == 0.0 { a } else { a.iter().zip(&b).map(|(a, b)| a + w * (b - a)).collect() })
    }
}

impl GammaProvider for PathGamma {
    fn grid(&self) -> BoxGrid {
        self.noise.grid
    }

    fn operator(&self, t: f64) -> Result<GammaOperator> {
        build_gamma(&self.noise, &self.beta_at(t)?, t)
    }
}

/// Test hook: `Zero` replaces `M` by 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    Full,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveOptions {
    pub force: bool,
    pub nonlinearity: Nonlinearity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrajectory {
    pub config: SolverConfig,
    pub mesh: SolverMesh,
    pub y: Vec<SpectralField>,
    /// `Γ_s⁻¹ M(Γ_s y_s)` at each node for the final `y`.
    pub integrand: Vec<SpectralField>,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub zp_norm: f64,
    /// Gate failed and the run went ahead on `force`.
    pub forced: bool,
    pub gate: Option<GateReport>,
    pub nonlinearity: Nonlinearity,
}

impl SolutionTrajectory {
    pub fn grid(&self) -> BoxGrid {
        self.y[0].grid
    }

    pub fn u0(&self) -> &SpectralField {
        &self.y[0]
    }

    /// `U_t = Γ_t y_t` at node `j`.
    pub fn u_at(&self, j: usize, gamma: &dyn GammaProvider) -> Result<SpectralField> {
        apply_gamma(&gamma.operator(self.mesh.times[j])?, &self.y[j], Direction::Forward)
    }
}

/// `Γ_t⁻¹ M(Γ_t y)`.
pub fn duhamel_integrand(y: &SpectralField, t: f64, gamma: &dyn GammaProvider, hook: Nonlinearity) -> Result<SpectralField> {
    if hook == Nonlinearity::Zero {
        return Ok(SpectralField::zeros(y.grid));
    }
    let op = gamma.operator(t)?;
    apply_gamma(&op, &nonlinearity(&apply_gamma(&op, y, Direction::Forward)?), Direction::Inverse)
}

fn integrands(mesh: &SolverMesh, y: &[SpectralField], gamma: &dyn GammaProvider, hook: Nonlinearity) -> Result<Vec<SpectralField>> {
    y.par_iter()
        .zip(mesh.times.par_iter())
        .map(|(y, &t)| duhamel_integrand(y, t, gamma, hook))
        .collect()
}

/// `e^{t_jΔ}U₀` at every node.
pub fn free_evolution(mesh: &SolverMesh, u0: &SpectralField) -> Result<Vec<SpectralField>> {
    mesh.times.iter().map(|&t| heat_semigroup(u0, t)).collect()
}

/// One Picard map `y ↦ e^{·Δ}U₀ + Q[F(y)]`.
pub fn picard_step(
    cfg: &SolverConfig,
    mesh: &SolverMesh,
    free: &[SpectralField],
    y: &[SpectralField],
    gamma: &dyn GammaProvider,
    hook: Nonlinearity,
) -> Result<(Vec<SpectralField>, Vec<SpectralField>)> {
    let f = integrands(mesh, y, gamma, hook)?;
    let q = duhamel_quadrature(mesh, &f, cfg.exponent(), HeatFactor::Heat)?;
    Ok((free.iter().zip(&q).map(|(a, b)| a.add(b)).collect(), f))
}

pub fn picard_solve(
    cfg: &SolverConfig,
    u0: &SpectralField,
    gamma: &dyn GammaProvider,
    gate: Option<&GateReport>,
    opts: SolveOptions,
) -> Result<SolutionTrajectory> {
    cfg.validate()?;
    if u0.grid != gamma.grid() {
        return Err(Error::GridMismatch("initial datum and noise model live on different grids".into()));
    }
    let gate_failed = gate.is_some_and(|g| !g.pass);
    if gate_failed && !opts.force {
        let g = gate.unwrap();
        return Err(Error::GateFailed { product: g.product, c_star: g.c_star });
    }
    let mesh = cfg.mesh()?;
    let free = free_evolution(&mesh, u0)?;
    let scale = zp_norm_of(&mesh.times, &free, cfg.p)?;
    let mut y = free.clone();
    let (mut distances, mut ratios) = (Vec::new(), Vec::new());
    for it in 1..=cfg.max_iterations {
        let (next, _) = picard_step(cfg, &mesh, &free, &y, gamma, opts.nonlinearity)?;
        let d = zp_distance(&mesh.times, &next, &y, cfg.p)?;
        if let Some(&prev) = distances.last() {
            ratios.push(if prev > 0.0 { d / prev } else { f64::INFINITY });
        }
        distances.push(d);
        y = next;
        if !d.is_finite() {
            return Err(Error::NonContraction { ratios });
        }
        if d <= cfg.tolerance * scale {
            let integrand = integrands(&mesh, &y, gamma, opts.nonlinearity)?;
            let zp = zp_norm_of(&mesh.times, &y, cfg.p)?;
            return Ok(SolutionTrajectory {
                config: cfg.clone(),
                mesh,
                y,
                integrand,
                distances,
                ratios,
                iterations: it,
                zp_norm: zp,
                forced: gate_failed,
                gate: gate.cloned(),
                nonlinearity: opts.nonlinearity,
            });
        }
        if ratios.len() >= 3 && ratios[ratios.len() - 3..].iter().all(|&r| r >= 1.0) {
            return Err(Error::NonContraction { ratios });
        }
    }
    Err(Error::MaxIterations(cfg.max_iterations))
}
