//! Numerical checks of the rough weak formulation for `U = Γy`: controlled
//! observables `⟨B̃_iU,φ⟩`, Gubinelli-integral residuals, remainder
//! quotients, the δΓ Taylor expansion and the Itô/Stratonovich identities.

mod decomposition;
mod identities;
pub mod report;
mod taylor;

pub use decomposition::{j_decomposition_check, lq_hoelder_quotient, integrand_continuity_check, observable_continuity, DecompositionCheck};
pub use identities::{ito_strat_identities, random_windows, Eq22Window, ItoStratReport};
pub use report::{run_verification, CheckResult, VerificationReport, VerifierConfig};
pub use taylor::{delta_gamma_taylor_check, taylor_rate, TaylorReport};

use crate::error::{Error, Result};
use crate::fit::{loglog_fit, RateFit};
use crate::gamma::NoiseModel;
use crate::roughpath::{gubinelli_integral, hoelder_norm, ControlledScalarPath, FineTimeGrid, Partition, RoughPath};
use crate::solver::SolutionTrajectory;
use crate::spectral::{BoxGrid, SpectralField};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

type Modes = [Complex64; 3];

/// `y_t` and `F_t = Γ_t⁻¹M(Γ_ty_t)` on selected modes at any `t ∈ [0, T]`.
pub trait TransformedPath: Sync {
    fn grid(&self) -> BoxGrid;
    fn horizon(&self) -> f64;
    fn modes_at(&self, t: f64, modes: &[usize]) -> Vec<(Modes, Modes)>;
}

/// Piecewise-linear interpolation in Fourier coefficients between solver nodes.
impl TransformedPath for SolutionTrajectory {
    fn grid(&self) -> BoxGrid {
        SolutionTrajectory::grid(self)
    }

    fn horizon(&self) -> f64 {
        self.mesh.horizon
    }

    fn modes_at(&self, t: f64, modes: &[usize]) -> Vec<(Modes, Modes)> {
        let times = &self.mesh.times;
        let j = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1) - 1;
        let w = ((t - times[j]) / (times[j + 1] - times[j])).clamp(0.0, 1.0);
        let pick = |f: &SpectralField, g: &SpectralField, k: usize| -> Modes {
            std::array::from_fn(|c| f.comps[c][k] * (1.0 - w) + g.comps[c][k] * w)
        };
        modes
            .iter()
            .map(|&k| (pick(&self.y[j], &self.y[j + 1], k), pick(&self.integrand[j], &self.integrand[j + 1], k)))
            .collect()
    }
}

/// `y_t = e^{tΔ}U₀` with `F ≡ 0`: the closed-form linear case.
#[derive(Debug, Clone)]
pub struct HeatFlow {
    pub u0: SpectralField,
    pub horizon: f64,
}

impl TransformedPath for HeatFlow {
    fn grid(&self) -> BoxGrid {
        self.u0.grid
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn modes_at(&self, t: f64, modes: &[usize]) -> Vec<(Modes, Modes)> {
        let g = self.u0.grid;
        let zero = [Complex64::new(0.0, 0.0); 3];
        modes
            .iter()
            .map(|&k| {
                let f = (-g.xi_sq(k) * t).exp();
                (std::array::from_fn(|c| self.u0.comps[c][k] * f), zero)
            })
            .collect()
    }
}

/// Fine-grid node window `[start, end]` with `start > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize, grid: &FineTimeGrid) -> Result<Self> {
        if start == 0 {
            return Err(Error::WindowTouchesZero(format!("[{start}, {end}]")));
        }
        if end <= start || end > grid.steps() {
            return Err(Error::DegenerateWindow(format!("[{start}, {end}] on {} steps", grid.steps())));
        }
        Ok(Self { start, end })
    }

    /// `[T/4, 3T/4]`.
    pub fn central(grid: &FineTimeGrid) -> Result<Self> {
        Self::new(grid.steps() / 4, 3 * grid.steps() / 4, grid)
    }

    /// Snaps the time fractions `[a, b]` of the horizon to nodes.
    pub fn from_fractions(a: f64, b: f64, grid: &FineTimeGrid) -> Result<Self> {
        let j = grid.steps() as f64;
        Self::new((a * j).round() as usize, (b * j).round() as usize, grid)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn nodes(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    /// The same time window on a grid coarsened by `factor`.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if self.start % factor != 0 || self.end % factor != 0 {
            return Err(Error::PartitionNotNested(format!("window [{}, {}] not on the coarse grid", self.start, self.end)));
        }
        Ok(Self { start: self.start / factor, end: self.end / factor })
    }
}

/// Scalar paths `Y^i = ⟨B̃_iU,φ⟩`, `Y'^{ik} = ⟨B̃_kB̃_iU,φ⟩` and the drift data
/// `⟨U,φ⟩`, `⟨U,Δφ⟩ + ⟨M(U),φ⟩`, `⟨y,φ⟩` at every node of a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlledObservable {
    pub window: Window,
    pub channels: usize,
    pub times: Vec<f64>,
    /// `y[node * N + i]`.
    pub y: Vec<f64>,
    /// `derivative[(node * N + i) * N + k]`.
    pub derivative: Vec<f64>,
    pub u_phi: Vec<f64>,
    pub drift: Vec<f64>,
    pub y_phi: Vec<f64>,
}

pub(crate) struct ModeData {
    pub(crate) modes: Vec<usize>,
    pub(crate) phi: Vec<Modes>,
    /// `b_i(k) = ĥ_i(k) + λ_i`, `symbols[mode][i]`.
    pub(crate) symbols: Vec<Vec<Complex64>>,
    pub(crate) xi_sq: Vec<f64>,
    pub(crate) volume: f64,
}

impl ModeData {
    pub(crate) fn new(noise: &NoiseModel, phi: &SpectralField) -> Result<Self> {
        if phi.grid != noise.grid {
            return Err(Error::GridMismatch("test function and noise model grids differ".into()));
        }
        let modes = phi.support();
        Ok(Self {
            phi: modes.iter().map(|&k| std::array::from_fn(|c| phi.comps[c][k])).collect(),
            symbols: modes.iter().map(|&k| noise.channels.iter().map(|c| c.symbol(k)).collect()).collect(),
            xi_sq: modes.iter().map(|&k| noise.grid.xi_sq(k)).collect(),
            volume: noise.grid.volume(),
            modes,
        })
    }

    /// `L³ Σ_k Re(w_k a_k · conj φ̂_k)`.
    pub(crate) fn pair(&self, a: &[Modes], weight: impl Fn(usize) -> Complex64) -> f64 {
        let mut s = 0.0;
        for (m, (v, p)) in a.iter().zip(&self.phi).enumerate() {
            let w = weight(m);
            for c in 0..3 {
                s += (w * v[c] * p[c].conj()).re;
            }
        }
        s * self.volume
    }
}

pub fn build_observable(
    source: &dyn TransformedPath,
    noise: &NoiseModel,
    rp: &RoughPath,
    phi: &SpectralField,
    window: Window,
) -> Result<ControlledObservable> {
    let grid = rp.grid();
    Window::new(window.start, window.end, grid)?;
    if source.grid() != noise.grid {
        return Err(Error::GridMismatch("trajectory and noise model grids differ".into()));
    }
    if noise.len() != rp.channels() {
        return Err(Error::InvalidArgument("noise and rough path disagree on N".into()));
    }
    if grid.horizon() > source.horizon() * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument("rough path extends beyond the trajectory horizon".into()));
    }
    let md = ModeData::new(noise, phi)?;
    let n = rp.channels();
    let per_node: Vec<(Vec<f64>, Vec<f64>, [f64; 3])> = window
        .nodes()
        .into_par_iter()
        .map(|j| {
            let t = grid.time(j);
            let beta = rp.path().values_at(j);
            let vals = source.modes_at(t, &md.modes);
            let gam: Vec<Complex64> = md.modes.iter().map(|&k| noise.gamma_symbol(k, &beta, t)).collect();
            let u: Vec<Modes> = vals.iter().zip(&gam).map(|((y, _), g)| y.map(|z| z * g)).collect();
            let mf: Vec<Modes> = vals.iter().zip(&gam).map(|((_, f), g)| f.map(|z| z * g)).collect();
            let ys: Vec<Modes> = vals.iter().map(|(y, _)| *y).collect();
            let y: Vec<f64> = (0..n).map(|i| md.pair(&u, |m| md.symbols[m][i])).collect();
            let d: Vec<f64> = (0..n * n).map(|ik| md.pair(&u, |m| md.symbols[m][ik / n] * md.symbols[m][ik % n])).collect();
            let one = |_| Complex64::new(1.0, 0.0);
            let drift = md.pair(&u, |m| Complex64::new(-md.xi_sq[m], 0.0)) + md.pair(&mf, one);
            (y, d, [md.pair(&u, one), drift, md.pair(&ys, one)])
        })
        .collect();
    let mut obs = ControlledObservable {
        window,
        channels: n,
        times: window.nodes().map(|j| grid.time(j)).collect(),
        y: Vec::new(),
        derivative: Vec::new(),
        u_phi: Vec::new(),
        drift: Vec::new(),
        y_phi: Vec::new(),
    };
    for (y, d, s) in per_node {
        obs.y.extend(y);
        obs.derivative.extend(d);
        obs.u_phi.push(s[0]);
        obs.drift.push(s[1]);
        obs.y_phi.push(s[2]);
    }
    Ok(obs)
}

impl ControlledObservable {
    /// The same data on a sub-window.
    pub fn restrict(&self, w: Window) -> Self {
        assert!(w.start >= self.window.start && w.end <= self.window.end && w.start < w.end, "sub-window outside the observable");
        let (a, b) = (w.start - self.window.start, w.end - self.window.start + 1);
        let n = self.channels;
        Self {
            window: w,
            channels: n,
            times: self.times[a..b].to_vec(),
            y: self.y[a * n..b * n].to_vec(),
            derivative: self.derivative[a * n * n..b * n * n].to_vec(),
            u_phi: self.u_phi[a..b].to_vec(),
            drift: self.drift[a..b].to_vec(),
            y_phi: self.y_phi[a..b].to_vec(),
        }
    }

    pub fn controlled_path(&self) -> Result<ControlledScalarPath> {
        ControlledScalarPath::new(self.window.start, self.channels, self.channels, self.y.clone(), self.derivative.clone())
    }

    pub fn value(&self, node: usize, i: usize) -> f64 {
        self.y[(node - self.window.start) * self.channels + i]
    }

    pub fn deriv(&self, node: usize, i: usize, k: usize) -> f64 {
        self.derivative[((node - self.window.start) * self.channels + i) * self.channels + k]
    }

    /// `⟨U_t − U_s, φ⟩ − ∫_s^t ⟨U,Δφ⟩ + ⟨M(U),φ⟩ dr`, trapezoid rule on the fine nodes.
    pub fn weak_lhs(&self) -> f64 {
        let drift: f64 = self.times.windows(2).zip(self.drift.windows(2)).map(|(t, d)| 0.5 * (t[1] - t[0]) * (d[0] + d[1])).sum();
        self.u_phi[self.u_phi.len() - 1] - self.u_phi[0] - drift
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoughResidual {
    pub lhs: f64,
    /// `Σ_i ∫ Y^i dβ^i` over the partition.
    pub rhs: f64,
    pub residual: f64,
}

pub fn rough_weak_residual(obs: &ControlledObservable, rp: &RoughPath, partition: &Partition) -> Result<RoughResidual> {
    let g = gubinelli_integral(&obs.controlled_path()?, rp, partition)?;
    let n = obs.channels;
    let rhs: f64 = (0..n).map(|i| g[i * n + i]).sum();
    let lhs = obs.weak_lhs();
    Ok(RoughResidual { lhs, rhs, residual: (lhs - rhs).abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRefinement {
    /// Full-window residual on the finest partition.
    pub full_window: f64,
    pub meshes: Vec<f64>,
    /// Root-mean-square residual over the sub-windows at each partition level.
    pub residuals: Vec<f64>,
    pub fit: RateFit,
}

impl ResidualRefinement {
    pub fn finest(&self) -> f64 {
        self.residuals[0]
    }

    pub fn coarsest(&self) -> f64 {
        self.residuals[self.residuals.len() - 1]
    }
}

/// Refines the partition together with the path resolution: level `l`
/// subsamples the driving path by `2^l`, re-enhances it and evaluates the
/// residual on its own nodes. At fixed resolution every dyadic partition of
/// the lattice shares the fine-step quadratic-variation error, so only the
/// joint refinement exposes a rate. The window is split into `pieces` equal
/// sub-windows and the RMS of their residuals is reported, since a single
/// window's residual is a signed random quantity.
pub fn residual_refinement(
    source: &dyn TransformedPath,
    noise: &NoiseModel,
    rp: &RoughPath,
    phi: &SpectralField,
    window: Window,
    levels: usize,
    pieces: usize,
) -> Result<ResidualRefinement> {
    let coarse = 1usize << levels;
    if pieces == 0 || window.start % coarse != 0 || window.len() % (pieces * coarse) != 0 {
        return Err(Error::PartitionNotNested(format!(
            "window [{}, {}] does not split into {pieces} pieces on the grid coarsened by 2^{levels}",
            window.start, window.end
        )));
    }
    let mut full_window = f64::NAN;
    let (mut meshes, mut residuals) = (Vec::new(), Vec::new());
    for l in 0..=levels {
        let rp_l = rp.coarsen(1 << l)?;
        let w = window.coarsen(1 << l)?;
        let obs = build_observable(source, noise, &rp_l, phi, w)?;
        if l == 0 {
            full_window = rough_weak_residual(&obs, &rp_l, &Partition::dyadic(w.start, w.end, 1)?)?.residual;
        }
        let len = w.len() / pieces;
        let mut sq = 0.0;
        for p in 0..pieces {
            let sub = obs.restrict(Window { start: w.start + p * len, end: w.start + (p + 1) * len });
            sq += rough_weak_residual(&sub, &rp_l, &Partition::dyadic(sub.window.start, sub.window.end, 1)?)?.residual.powi(2);
        }
        meshes.push(rp_l.grid().dt());
        residuals.push((sq / pieces as f64).sqrt());
    }
    let fit = loglog_fit(&meshes, &residuals);
    Ok(ResidualRefinement { full_window, meshes, residuals, fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderQuotients {
    /// `sup |R_{uv}| / |v−u|^{2α}`, `R^i_{uv} = δY^i_{uv} − Σ_k Y'^{ik}_u δβ^k_{uv}`.
    pub remainder: f64,
    /// `α`-Hölder seminorm of `Y'`.
    pub derivative: f64,
}

pub fn remainder_quotients(obs: &ControlledObservable, rp: &RoughPath, alpha: f64) -> Result<RemainderQuotients> {
    let w = obs.window;
    let n = obs.channels;
    let lattice: Vec<Vec<f64>> = w.nodes().map(|j| rp.path().values_at(j)).collect();
    let remainder = (0..=w.len())
        .into_par_iter()
        .map(|a| {
            let mut worst = 0.0f64;
            for b in a + 1..=w.len() {
                let h = (obs.times[b] - obs.times[a]).powf(2.0 * alpha);
                let mut sq = 0.0;
                for i in 0..n {
                    let mut r = obs.value(w.start + b, i) - obs.value(w.start + a, i);
                    for k in 0..n {
                        r -= obs.deriv(w.start + a, i, k) * (lattice[b][k] - lattice[a][k]);
                    }
                    sq += r * r;
                }
                worst = worst.max(sq.sqrt() / h);
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    let ders: Vec<Vec<f64>> = obs.derivative.chunks(n * n).map(<[f64]>::to_vec).collect();
    let derivative = hoelder_norm(&obs.times, &ders, alpha)?;
    Ok(RemainderQuotients { remainder, derivative })
}
