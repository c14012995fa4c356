//! Brownian driving paths, their level-2 enhancement, and the Gubinelli
//! integral of controlled paths.
//!
//! Path values live on a dyadic fixed-point lattice (`QUANTUM = 2^-24`) and
//! per-interval level-2 tensors are stored as integers in units of
//! `QUANTUM^2 / 2`. Chen composition is therefore carried out in exact
//! integer arithmetic and the Chen defect of a constructed enhancement is
//! identically zero.

mod gubinelli;
mod hoelder;
pub mod store;

pub use gubinelli::{gubinelli_integral, refinement_rate, ControlledScalarPath, Partition};
pub use hoelder::{hoelder_norm, hoelder_norm_level2};

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Lattice spacing of sampled path values.
pub const QUANTUM: f64 = 1.0 / (1u64 << 24) as f64;
/// Value of one level-2 integer unit, `QUANTUM^2 / 2 = 2^-49`.
pub const LEVEL2_UNIT: f64 = 1.0 / (1u64 << 49) as f64;

pub const DEFAULT_ALPHA: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineTimeGrid {
    horizon: f64,
    steps: usize,
}

impl FineTimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if steps < 2 || !steps.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "step count J must be a power of two and at least 2, got {steps}"
            )));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, node: usize) -> f64 {
        if node == self.steps {
            self.horizon
        } else {
            node as f64 * self.horizon / self.steps as f64
        }
    }

    /// Maps a time back to its node index, rejecting off-grid times.
    pub fn node_of(&self, t: f64) -> Result<usize> {
        let x = t / self.dt();
        let j = x.round();
        if !(0.0..=self.steps as f64).contains(&j) || (x - j).abs() > 1e-9 {
            return Err(Error::NotAGridNode(t));
        }
        Ok(j as usize)
    }

    /// Grid with every `factor`-th node retained.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !factor.is_power_of_two() || factor > self.steps / 2 {
            return Err(Error::InvalidGrid(format!("cannot coarsen J={} by {factor}", self.steps)));
        }
        Self::new(self.horizon, self.steps / factor)
    }
}

/// Sampled values of N independent Brownian motions on a fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingPath {
    grid: FineTimeGrid,
    channels: usize,
    seed: u64,
    /// Node-major lattice values, `values[node * channels + i]`.
    lattice: Vec<i64>,
}

impl DrivingPath {
    pub fn from_lattice(grid: FineTimeGrid, channels: usize, seed: u64, lattice: Vec<i64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument("channel count must be at least 1".into()));
        }
        if lattice.len() != grid.nodes() * channels {
            return Err(Error::InvalidArgument(format!(
                "expected {} lattice values, got {}",
                grid.nodes() * channels,
                lattice.len()
            )));
        }
        if lattice[..channels].iter().any(|&v| v != 0) {
            return Err(Error::InvalidArgument("driving path must start at 0".into()));
        }
        Ok(Self { grid, channels, seed, lattice })
    }

    /// Builds a path from real values, rounding each to the lattice.
    pub fn from_values(grid: FineTimeGrid, channels: usize, values: &[f64]) -> Result<Self> {
        let lattice = values.iter().map(|v| (v / QUANTUM).round() as i64).collect();
        Self::from_lattice(grid, channels, 0, lattice)
    }

    pub fn grid(&self) -> &FineTimeGrid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn value(&self, node: usize, channel: usize) -> f64 {
        self.lattice[node * self.channels + channel] as f64 * QUANTUM
    }

    pub fn values_at(&self, node: usize) -> Vec<f64> {
        (0..self.channels).map(|i| self.value(node, i)).collect()
    }

    pub(crate) fn lattice_at(&self, node: usize, channel: usize) -> i64 {
        self.lattice[node * self.channels + channel]
    }

    /// `δβ_{ab}` per channel; exact on the lattice.
    pub fn increment(&self, a: usize, b: usize) -> Vec<f64> {
        (0..self.channels)
            .map(|i| (self.lattice_at(b, i) - self.lattice_at(a, i)) as f64 * QUANTUM)
            .collect()
    }

    /// Raw lattice values, node-major.
    pub fn lattice(&self) -> &[i64] {
        &self.lattice
    }

    /// Subsamples every `factor`-th node.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let lattice = (0..grid.nodes())
            .flat_map(|j| (0..self.channels).map(move |i| (j, i)))
            .map(|(j, i)| self.lattice_at(j * factor, i))
            .collect();
        Self::from_lattice(grid, self.channels, self.seed, lattice)
    }
}

/// Samples N independent Brownian motions with increments of variance `T/J`.
pub fn sample_brownian(seed: u64, channels: usize, grid: FineTimeGrid) -> Result<DrivingPath> {
    if channels == 0 {
        return Err(Error::InvalidArgument("channel count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = grid.dt().sqrt();
    let mut lattice = vec![0i64; grid.nodes() * channels];
    for j in 1..grid.nodes() {
        for i in 0..channels {
            let z: f64 = StandardNormal.sample(&mut rng);
            let step = (z * sd / QUANTUM).round() as i64;
            lattice[j * channels + i] = lattice[(j - 1) * channels + i] + step;
        }
    }
    DrivingPath::from_lattice(grid, channels, seed, lattice)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Ito,
    Stratonovich,
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Flavor::Ito => write!(f, "ito"),
            Flavor::Stratonovich => write!(f, "stratonovich"),
        }
    }
}

impl std::str::FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ito" | "itô" => Ok(Flavor::Ito),
            "stratonovich" | "strat" => Ok(Flavor::Stratonovich),
            other => Err(Error::InvalidArgument(format!("unknown flavor `{other}`"))),
        }
    }
}

/// A driving path together with its level-2 enhancement.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughPath {
    path: DrivingPath,
    flavor: Flavor,
    alpha: f64,
    /// Per fine interval `j -> j+1`, an N×N row-major tensor in `LEVEL2_UNIT`s.
    interval_tensors: Vec<i128>,
    /// Composite pairs whose tensor is pinned instead of composed.
    overrides: Vec<(usize, usize, Vec<i128>)>,
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 / 3.0 && alpha < 0.5) {
        return Err(Error::Exponents(format!("alpha must lie in (1/3, 1/2), got {alpha}")));
    }
    Ok(())
}

/// Builds the level-2 enhancement: left-point sums (Itô) or trapezoid sums
/// (Stratonovich) on the finest grid.
pub fn enhance(path: DrivingPath, flavor: Flavor) -> RoughPath {
    enhance_with_alpha(path, flavor, DEFAULT_ALPHA).expect("default alpha is valid")
}

pub fn enhance_with_alpha(path: DrivingPath, flavor: Flavor, alpha: f64) -> Result<RoughPath> {
    check_alpha(alpha)?;
    let n = path.channels;
    let steps = path.grid.steps();
    let mut interval_tensors = vec![0i128; steps * n * n];
    if flavor == Flavor::Stratonovich {
        for j in 0..steps {
            for i in 0..n {
                let di = (path.lattice_at(j + 1, i) - path.lattice_at(j, i)) as i128;
                for k in 0..n {
                    let dk = (path.lattice_at(j + 1, k) - path.lattice_at(j, k)) as i128;
                    // ½ δβ^i δβ^k in units of QUANTUM²/2
                    interval_tensors[(j * n + i) * n + k] = di * dk;
                }
            }
        }
    }
    Ok(RoughPath { path, flavor, alpha, interval_tensors, overrides: Vec::new() })
}

impl RoughPath {
    /// Reassembles a rough path from stored per-interval tensors.
    pub fn from_parts(path: DrivingPath, flavor: Flavor, alpha: f64, interval_tensors: Vec<i128>) -> Result<Self> {
        check_alpha(alpha)?;
        let n = path.channels;
        if interval_tensors.len() != path.grid.steps() * n * n {
            return Err(Error::InvalidArgument("interval tensor count does not match grid".into()));
        }
        Ok(Self { path, flavor, alpha, interval_tensors, overrides: Vec::new() })
    }

    pub fn path(&self) -> &DrivingPath {
        &self.path
    }

    pub fn grid(&self) -> &FineTimeGrid {
        &self.path.grid
    }

    pub fn channels(&self) -> usize {
        self.path.channels
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn interval_tensors(&self) -> &[i128] {
        &self.interval_tensors
    }

    /// Adds `delta` to entry `(i, k)` of the tensor over fine interval `j`.
    /// Breaks Chen's relation on purpose; used to exercise the defect check.
    pub fn perturb_interval(&mut self, j: usize, i: usize, k: usize, delta: f64) {
        let n = self.channels();
        self.interval_tensors[(j * n + i) * n + k] += (delta / LEVEL2_UNIT).round() as i128;
    }

    /// Pins `𝔹_{ab}` to its composed value plus `delta` in entry `(i, k)`,
    /// the way a dense pair table with one corrupted entry would behave.
    pub fn perturb_pair(&mut self, a: usize, b: usize, i: usize, k: usize, delta: f64) {
        let n = self.channels();
        let mut t = self.level2_exact(a, b);
        t[i * n + k] += (delta / LEVEL2_UNIT).round() as i128;
        self.overrides.retain(|(x, y, _)| (*x, *y) != (a, b));
        self.overrides.push((a, b, t));
    }

    /// Exact `𝔹_{ab}` (a ≤ b) in `LEVEL2_UNIT`s by Chen composition.
    pub fn level2_exact(&self, a: usize, b: usize) -> Vec<i128> {
        if let Some((_, _, t)) = self.overrides.iter().find(|(x, y, _)| (*x, *y) == (a, b)) {
            return t.clone();
        }
        let n = self.channels();
        let mut acc = vec![0i128; n * n];
        for j in a..b {
            for i in 0..n {
                let lead = (self.path.lattice_at(j, i) - self.path.lattice_at(a, i)) as i128;
                for k in 0..n {
                    let dk = (self.path.lattice_at(j + 1, k) - self.path.lattice_at(j, k)) as i128;
                    acc[i * n + k] += self.interval_tensors[(j * n + i) * n + k] + 2 * lead * dk;
                }
            }
        }
        acc
    }

    /// `𝔹_{ab}` as a row-major N×N matrix of reals.
    pub fn level2(&self, a: usize, b: usize) -> Vec<f64> {
        self.level2_exact(a, b).into_iter().map(|v| v as f64 * LEVEL2_UNIT).collect()
    }

    /// `𝔹_{uv} − 𝔹_{uw} − 𝔹_{wv} − δβ_{uw}⊗δβ_{wv}` for grid times `u < w < v`.
    pub fn chen_defect(&self, u: f64, w: f64, v: f64) -> Result<Vec<f64>> {
        let g = self.grid();
        let (a, c, b) = (g.node_of(u)?, g.node_of(w)?, g.node_of(v)?);
        if !(a < c && c < b) {
            return Err(Error::InvalidArgument(format!("need u < w < v, got {u}, {w}, {v}")));
        }
        Ok(self.chen_defect_nodes(a, c, b))
    }

    pub fn chen_defect_nodes(&self, a: usize, c: usize, b: usize) -> Vec<f64> {
        let n = self.channels();
        let full = self.level2_exact(a, b);
        let left = self.level2_exact(a, c);
        let right = self.level2_exact(c, b);
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let di = (self.path.lattice_at(c, i) - self.path.lattice_at(a, i)) as i128;
            for k in 0..n {
                let dk = (self.path.lattice_at(b, k) - self.path.lattice_at(c, k)) as i128;
                let d = full[i * n + k] - left[i * n + k] - right[i * n + k] - 2 * di * dk;
                out[i * n + k] = d as f64 * LEVEL2_UNIT;
            }
        }
        out
    }

    /// Discrete quadratic covariation `Σ δβ^i δβ^k` over fine steps in `[a, b]`.
    pub fn quadratic_covariation(&self, a: usize, b: usize) -> Vec<f64> {
        let n = self.channels();
        let mut acc = vec![0i128; n * n];
        for j in a..b {
            for i in 0..n {
                let di = (self.path.lattice_at(j + 1, i) - self.path.lattice_at(j, i)) as i128;
                for k in 0..n {
                    let dk = (self.path.lattice_at(j + 1, k) - self.path.lattice_at(j, k)) as i128;
                    acc[i * n + k] += di * dk;
                }
            }
        }
        acc.into_iter().map(|v| v as f64 * QUANTUM * QUANTUM).collect()
    }

    /// Re-enhances the path subsampled by `factor` with the same flavor.
    pub fn coarsen(&self, factor: usize) -> Result<RoughPath> {
        enhance_with_alpha(self.path.coarsen(factor)?, self.flavor, self.alpha)
    }

    /// Same driving path, other flavor.
    pub fn with_flavor(&self, flavor: Flavor) -> RoughPath {
        enhance_with_alpha(self.path.clone(), flavor, self.alpha).expect("alpha already validated")
    }

    pub fn beta_hoelder(&self, a: usize, b: usize) -> Result<f64> {
        let times: Vec<f64> = (a..=b).map(|j| self.grid().time(j)).collect();
        let vals: Vec<Vec<f64>> = (a..=b).map(|j| self.path.values_at(j)).collect();
        hoelder_norm(&times, &vals, self.alpha)
    }

    pub fn level2_hoelder(&self, a: usize, b: usize) -> Result<f64> {
        hoelder_norm_level2(self, a, b, self.alpha)
    }
}
