//! Run configuration, pipeline orchestration and refinement sweeps.

mod pipeline;
mod sweep;

pub use pipeline::{evaluate_gate, run_pipeline, sha256_hex, write_diagnostics, write_gate, ArtifactDigest, RunManifest, StageRecord, StageStatus, MANIFEST_FILE};
pub use sweep::{sweep, SweepAxis, SweepIntegrand, SweepRow, SweepTable};

use crate::error::{Error, Result};
use crate::gamma::{NoiseChannel, NoiseModel};
use crate::roughpath::{enhance_with_alpha, sample_brownian, FineTimeGrid, Flavor, RoughPath};
use crate::solver::{Nonlinearity, SolverConfig};
use crate::spectral::{lp_norm_spectral, project_div_free, BoxGrid, FourierMultiplier, KernelSpec, SpectralField};
use crate::verifier::VerifierConfig;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Enhance,
    Gate,
    Simulate,
    Verify,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Enhance => "enhance",
            Stage::Gate => "gate",
            Stage::Simulate => "simulate",
            Stage::Verify => "verify",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub side: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { side: 32.0, n: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub lambda: f64,
    pub kernel: KernelSpec,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub global_mode: bool,
    /// Stride over fine nodes when sampling `η̄_t` for the gate.
    #[serde(default = "one")]
    pub eta_stride: usize,
    pub channels: Vec<ChannelConfig>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let ch = |lambda| ChannelConfig { lambda, kernel: KernelSpec::Gaussian { sigma: 3.0, mass: 0.05 } };
        Self { global_mode: false, eta_stride: 1, channels: vec![ch(0.5), ch(0.6)] }
    }
}

fn default_max_mode() -> i64 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    /// Random divergence-free trigonometric polynomial with `|k|_∞ ≤ max_mode`,
    /// rescaled so that `|U₀|_{3/2} = norm`.
    Smooth {
        seed: u64,
        norm: f64,
        #[serde(default = "default_max_mode")]
        max_mode: i64,
    },
    /// Field store stem (header plus binary).
    Store { path: String },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Smooth { seed: 1, norm: 1e-3, max_mode: 2 }
    }
}

fn ito() -> Flavor {
    Flavor::Ito
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoughPathConfig {
    pub horizon: f64,
    pub steps: usize,
    pub alpha: f64,
    #[serde(default = "ito")]
    pub flavor: Flavor,
    /// Existing store to use instead of the `enhance` stage.
    #[serde(default)]
    pub store: Option<String>,
}

impl Default for RoughPathConfig {
    fn default() -> Self {
        Self { horizon: 1.0, steps: 4096, alpha: 0.4, flavor: Flavor::Ito, store: None }
    }
}

fn default_cap() -> u64 {
    4 << 30
}

fn default_levels() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Estimated peak memory above this aborts a sweep before it allocates.
    #[serde(default = "default_cap")]
    pub memory_cap_bytes: u64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub integrand: SweepIntegrand,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { memory_cap_bytes: default_cap(), levels: default_levels(), integrand: SweepIntegrand::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub stages: Vec<Stage>,
    /// Run the solver even when the smallness gate fails.
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub roughpath: RoughPathConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verifier: VerifierConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn new(seed: u64, output: impl Into<PathBuf>) -> Self {
        Self {
            seed,
            output: output.into(),
            stages: vec![Stage::Enhance, Stage::Gate, Stage::Simulate, Stage::Verify],
            force: false,
            nonlinearity: Nonlinearity::Full,
            grid: GridConfig::default(),
            noise: NoiseConfig::default(),
            initial: InitialConfig::default(),
            roughpath: RoughPathConfig::default(),
            solver: SolverConfig::default(),
            verifier: VerifierConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    /// Parses and validates; parse errors and every failed constraint come
    /// back as `Error::Config`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    /// Every violated constraint, each prefixed with its field path.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = BoxGrid::new(self.grid.side, self.grid.n) {
            out.push(format!("grid: {e}"));
        }
        if self.noise.channels.is_empty() {
            out.push("noise.channels must hold at least one channel".into());
        }
        if self.noise.eta_stride == 0 {
            out.push("noise.eta_stride must be at least 1".into());
        }
        for (i, c) in self.noise.channels.iter().enumerate() {
            if !c.lambda.is_finite() {
                out.push(format!("noise.channels[{i}].lambda = {} must be finite", c.lambda));
            }
            match &c.kernel {
                KernelSpec::Gaussian { sigma, mass } => {
                    if !(*sigma > 0.0 && sigma.is_finite()) {
                        out.push(format!("noise.channels[{i}].kernel.sigma = {sigma} must be positive"));
                    }
                    if !(*mass >= 0.0 && mass.is_finite()) {
                        out.push(format!("noise.channels[{i}].kernel.mass = {mass} must be non-negative"));
                    }
                }
                KernelSpec::Store { path } => {
                    if !Path::new(path).with_extension("json").exists() {
                        out.push(format!("noise.channels[{i}].kernel.path = {path} has no header file"));
                    }
                }
                KernelSpec::Zero | KernelSpec::Delta => {}
            }
        }
        match &self.initial {
            InitialConfig::Smooth { norm, max_mode, .. } => {
                if !(*norm >= 0.0 && norm.is_finite()) {
                    out.push(format!("initial.norm = {norm} must be non-negative"));
                }
                if let Ok(g) = BoxGrid::new(self.grid.side, self.grid.n) {
                    let cut = crate::spectral::dealias_cutoff(&g);
                    if !(*max_mode >= 1 && *max_mode <= cut) {
                        out.push(format!("initial.max_mode = {max_mode} must lie in [1, {cut}] (the dealiased band)"));
                    }
                }
            }
            InitialConfig::Store { path } => {
                if !Path::new(path).with_extension("json").exists() {
                    out.push(format!("initial.path = {path} has no header file"));
                }
            }
        }
        let rp = &self.roughpath;
        if !(rp.horizon > 0.0 && rp.horizon.is_finite()) {
            out.push(format!("roughpath.horizon = {} must be positive", rp.horizon));
        }
        if !rp.steps.is_power_of_two() || rp.steps < 16 {
            out.push(format!("roughpath.steps = {} must be a power of two, at least 16", rp.steps));
        }
        if !(rp.alpha > 1.0 / 3.0 && rp.alpha < 0.5) {
            out.push(format!("roughpath.alpha = {} must lie in (1/3, 1/2)", rp.alpha));
        }
        if let Some(s) = &rp.store {
            if !Path::new(s).join(crate::roughpath::store::HEADER_FILE).exists() {
                out.push(format!("roughpath.store = {s} holds no rough-path header"));
            }
        }
        out.extend(self.solver.diagnostics());
        if self.solver.horizon != rp.horizon {
            out.push(format!("solver.horizon = {} must equal roughpath.horizon = {}", self.solver.horizon, rp.horizon));
        }
        if self.solver.alpha != rp.alpha {
            out.push(format!("solver.alpha = {} must equal roughpath.alpha = {}", self.solver.alpha, rp.alpha));
        }
        let v = &self.verifier;
        out.extend(v.diagnostics());
        if rp.steps.is_power_of_two() && v.diagnostics().is_empty() {
            let j = rp.steps as f64;
            let (a, b) = (v.window[0] * j, v.window[1] * j);
            let align = (v.pieces << v.partition_levels) as f64;
            if a.fract() != 0.0 || b.fract() != 0.0 {
                out.push(format!("verifier.window = {:?} does not land on fine nodes of J = {}", v.window, rp.steps));
            } else if a % (1u64 << v.partition_levels) as f64 != 0.0 || (b - a) % align != 0.0 {
                out.push(format!(
                    "verifier.window = {:?} must start on a multiple of 2^partition_levels and span a multiple of pieces·2^partition_levels fine steps",
                    v.window
                ));
            }
            if (b - a) < (1u64 << (v.taylor_levels - 1)) as f64 {
                out.push(format!("verifier.taylor_levels = {} exceed the window length", v.taylor_levels));
            }
            if v.eq22_min_steps > rp.steps {
                out.push(format!("verifier.eq22_min_steps = {} exceeds J = {}", v.eq22_min_steps, rp.steps));
            }
        }
        if self.sweep.levels == 0 {
            out.push("sweep.levels must be at least 1".into());
        }
        for (i, s) in self.stages.iter().enumerate() {
            if self.stages[..i].contains(s) {
                out.push(format!("stages[{i}] = {s} is repeated"));
            }
            let earlier = |t: Stage| self.stages[..i].contains(&t);
            match s {
                Stage::Gate | Stage::Simulate if !earlier(Stage::Enhance) && rp.store.is_none() => {
                    out.push(format!("stages[{i}] = {s} needs an earlier enhance stage or roughpath.store"));
                }
                Stage::Verify if !earlier(Stage::Simulate) => {
                    out.push(format!("stages[{i}] = verify needs an earlier simulate stage"));
                }
                _ => {}
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() { Ok(()) } else { Err(Error::Config(d)) }
    }

    pub fn box_grid(&self) -> Result<BoxGrid> {
        BoxGrid::new(self.grid.side, self.grid.n)
    }

    pub fn fine_grid(&self) -> Result<FineTimeGrid> {
        FineTimeGrid::new(self.roughpath.horizon, self.roughpath.steps)
    }

    pub fn noise_model_on(&self, grid: BoxGrid) -> Result<NoiseModel> {
        let channels = self
            .noise
            .channels
            .iter()
            .map(|c| Ok(NoiseChannel { kernel: FourierMultiplier::from_spec(grid, &c.kernel)?, lambda: c.lambda }))
            .collect::<Result<Vec<_>>>()?;
        NoiseModel::new(grid, channels, self.noise.global_mode)
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        self.noise_model_on(self.box_grid()?)
    }

    pub fn initial_datum_on(&self, grid: BoxGrid) -> Result<SpectralField> {
        match &self.initial {
            InitialConfig::Smooth { seed, norm, max_mode } => smooth_datum(grid, *seed, *max_mode, *norm),
            InitialConfig::Store { path } => {
                let f = crate::spectral::store::read_field(Path::new(path))?;
                if f.grid != grid {
                    return Err(Error::GridMismatch(format!("initial datum {path} lives on another grid")));
                }
                Ok(f)
            }
        }
    }

    pub fn initial_datum(&self) -> Result<SpectralField> {
        self.initial_datum_on(self.box_grid()?)
    }

    /// Samples the driving path from `seed` and enhances it.
    pub fn sample_rough_path(&self) -> Result<RoughPath> {
        let path = sample_brownian(self.seed, self.noise.channels.len(), self.fine_grid()?)?;
        enhance_with_alpha(path, self.roughpath.flavor, self.roughpath.alpha)
    }

    /// The configured store if any, else a fresh sample.
    pub fn rough_path(&self) -> Result<RoughPath> {
        match &self.roughpath.store {
            Some(s) => crate::roughpath::store::read_store(Path::new(s)),
            None => self.sample_rough_path(),
        }
    }
}

/// Divergence-free trigonometric polynomial with Gaussian coefficients on
/// `|k|_∞ ≤ max_mode`, scaled to `|U₀|_{3/2} = norm`. The same seed gives the
/// same function on every grid that resolves it.
pub fn smooth_datum(grid: BoxGrid, seed: u64, max_mode: i64, norm: f64) -> Result<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = SpectralField::zeros(grid);
    let m = max_mode;
    for a in -m..=m {
        for b in -m..=m {
            for c in -m..=m {
                let k = [a, b, c];
                let amp = (-(a * a + b * b + c * c) as f64 / 4.0).exp();
                let z: [Complex64; 3] = std::array::from_fn(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * amp
                });
                if k == [0, 0, 0] {
                    continue;
                }
                let flat = grid.flat(k.map(|x| grid.index_of_wavenumber(x)));
                for comp in 0..3 {
                    u.comps[comp][flat] = z[comp];
                }
            }
        }
    }
    for comp in u.comps.iter_mut() {
        crate::spectral::hermitian_part(comp, &grid);
    }
    let u = project_div_free(&u);
    let n0 = lp_norm_spectral(&u, 1.5)?;
    Ok(if norm == 0.0 { SpectralField::zeros(grid) } else { u.scale(norm / n0) })
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Process exit code for an error: 2 config, 3 gate, 4 non-contraction,
/// 5 verification, 1 anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Stage { source, .. } => exit_code(source),
        Error::Config(_) | Error::Exponents(_) => 2,
        Error::GateFailed { .. } => 3,
        Error::NonContraction { .. } | Error::MaxIterations(_) => 4,
        Error::VerificationFailed(_) => 5,
        _ => 1,
    }
}
