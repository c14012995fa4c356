use super::{RoughPath, LEVEL2_UNIT, QUANTUM};
use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::fit::{loglog_fit, RateFit};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Scalar paths `Y^μ` on a contiguous node window with Gubinelli derivative
/// `Y'^{μk}` against each driving channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledScalarPath {
    start: usize,
    components: usize,
    channels: usize,
    values: Vec<f64>,
    derivative: Vec<f64>,
}

impl ControlledScalarPath {
    /// `values[node * m + μ]`, `derivative[(node * m + μ) * N + k]`, nodes
    /// counted from `start`.
    pub fn new(start: usize, components: usize, channels: usize, values: Vec<f64>, derivative: Vec<f64>) -> Result<Self> {
        if start == 0 {
            return Err(Error::WindowTouchesZero("controlled paths live on windows with s > 0".into()));
        }
        if components == 0 || channels == 0 || values.len() % components != 0 {
            return Err(Error::InvalidArgument("inconsistent component count".into()));
        }
        let nodes = values.len() / components;
        if nodes < 2 {
            return Err(Error::DegenerateWindow("controlled path needs at least two nodes".into()));
        }
        if derivative.len() != nodes * components * channels {
            return Err(Error::InvalidArgument(format!(
                "derivative has {} entries, expected {}",
                derivative.len(),
                nodes * components * channels
            )));
        }
        Ok(Self { start, components, channels, values, derivative })
    }

    /// Builds `Y` and `Y'` by evaluating closures at each node of `[start, end]`.
    pub fn from_fn(
        rp: &RoughPath,
        start: usize,
        end: usize,
        components: usize,
        mut value: impl FnMut(usize) -> Vec<f64>,
        mut derivative: impl FnMut(usize) -> Vec<f64>,
    ) -> Result<Self> {
        if end > rp.grid().steps() || end <= start {
            return Err(Error::DegenerateWindow(format!("window [{start}, {end}]")));
        }
        let mut vals = Vec::new();
        let mut ders = Vec::new();
        for j in start..=end {
            vals.extend(value(j));
            ders.extend(derivative(j));
        }
        Self::new(start, components, rp.channels(), vals, ders)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.start + self.values.len() / self.components - 1
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn value(&self, node: usize, mu: usize) -> f64 {
        self.values[(node - self.start) * self.components + mu]
    }

    pub fn derivative(&self, node: usize, mu: usize, k: usize) -> f64 {
        self.derivative[((node - self.start) * self.components + mu) * self.channels + k]
    }

    /// `R^μ_{uv} = δY^μ_{uv} − Σ_k Y'^{μk}_u δβ^k_{uv}`.
    pub fn remainder(&self, rp: &RoughPath, u: usize, v: usize) -> Vec<f64> {
        let d = rp.path().increment(u, v);
        (0..self.components)
            .map(|mu| {
                let mut r = self.value(v, mu) - self.value(u, mu);
                for (k, dk) in d.iter().enumerate() {
                    r -= self.derivative(u, mu, k) * dk;
                }
                r
            })
            .collect()
    }
}

/// A strictly increasing list of fine-grid nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition(pub Vec<usize>);

impl Partition {
    /// Every `step`-th node of `[start, end]`; `end − start` must be a multiple of `step`.
    pub fn dyadic(start: usize, end: usize, step: usize) -> Result<Self> {
        if step == 0 || end <= start || (end - start) % step != 0 {
            return Err(Error::PartitionNotNested(format!("step {step} does not divide [{start}, {end}]")));
        }
        Ok(Self((start..=end).step_by(step).collect()))
    }

    /// Random subset of interior nodes together with both endpoints.
    pub fn random(start: usize, end: usize, keep: f64, rng: &mut impl Rng) -> Self {
        let mut nodes = vec![start];
        for j in start + 1..end {
            if rng.random::<f64>() < keep {
                nodes.push(j);
            }
        }
        nodes.push(end);
        Self(nodes)
    }

    pub fn mesh(&self, rp: &RoughPath) -> f64 {
        self.0
            .windows(2)
            .map(|w| rp.grid().time(w[1]) - rp.grid().time(w[0]))
            .fold(0.0, f64::max)
    }
}

fn split_level2(v: i128) -> (f64, f64) {
    let hi = v as f64;
    let lo = (v - hi as i128) as f64;
    (hi * LEVEL2_UNIT, lo * LEVEL2_UNIT)
}

/// Compensated Riemann sum
/// `Σ_i (Y^μ_{t_i} δβ^ν_{t_i t_{i+1}} + Σ_k Y'^{μk}_{t_i} 𝔹^{kν}_{t_i t_{i+1}})`
/// for every `(μ, ν)`, returned row-major as an `m × N` matrix.
///
/// Each entry is accumulated exactly and rounded once, so partition
/// independence that holds in exact arithmetic holds bit-for-bit.
pub fn gubinelli_integral(y: &ControlledScalarPath, rp: &RoughPath, partition: &Partition) -> Result<Vec<f64>> {
    let nodes = &partition.0;
    if nodes.len() < 2 {
        return Err(Error::PartitionNotNested("partition needs at least two nodes".into()));
    }
    if nodes[0] != y.start() || *nodes.last().unwrap() != y.end() {
        return Err(Error::PartitionNotNested(format!(
            "partition spans [{}, {}] but the controlled path lives on [{}, {}]",
            nodes[0],
            nodes.last().unwrap(),
            y.start(),
            y.end()
        )));
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) || *nodes.last().unwrap() > rp.grid().steps() {
        return Err(Error::PartitionNotNested("nodes must be strictly increasing grid nodes".into()));
    }
    if y.channels != rp.channels() {
        return Err(Error::InvalidArgument("channel count mismatch".into()));
    }
    let (m, n) = (y.components, rp.channels());
    let mut acc = vec![ExactSum::new(); m * n];
    for w in nodes.windows(2) {
        let (u, v) = (w[0], w[1]);
        let level2 = rp.level2_exact(u, v);
        let split: Vec<(f64, f64)> = level2.into_iter().map(split_level2).collect();
        for nu in 0..n {
            let d = (rp.path().lattice_at(v, nu) - rp.path().lattice_at(u, nu)) as f64 * QUANTUM;
            for mu in 0..m {
                let s = &mut acc[mu * n + nu];
                s.add_product(y.value(u, mu), d);
                for k in 0..n {
                    let yd = y.derivative(u, mu, k);
                    let (hi, lo) = split[k * n + nu];
                    s.add_product(yd, hi);
                    s.add_product(yd, lo);
                }
            }
        }
    }
    Ok(acc.iter().map(ExactSum::value).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub meshes: Vec<f64>,
    /// Frobenius distance of each coarse sum to the finest-grid sum.
    pub differences: Vec<f64>,
    pub fit: RateFit,
}

/// Fits the decay of `|I(𝒫_k) − I(𝒫_0)|` against `|𝒫_k|` over dyadic
/// partitions with steps `2, 4, …, 2^levels` fine intervals.
pub fn refinement_rate(y: &ControlledScalarPath, rp: &RoughPath, levels: usize) -> Result<RefinementReport> {
    let (start, end) = (y.start(), y.end());
    if end - start < 16 {
        return Err(Error::DegenerateWindow(format!("window of {} steps; need at least 16", end - start)));
    }
    if levels == 0 || (end - start) % (1 << levels) != 0 || (end - start) >> levels < 1 {
        return Err(Error::PartitionNotNested(format!("{levels} dyadic levels do not fit [{start}, {end}]")));
    }
    let finest = gubinelli_integral(y, rp, &Partition::dyadic(start, end, 1)?)?;
    let mut meshes = Vec::new();
    let mut differences = Vec::new();
    for k in 1..=levels {
        let step = 1 << k;
        let part = Partition::dyadic(start, end, step)?;
        let coarse = gubinelli_integral(y, rp, &part)?;
        let d = coarse.iter().zip(&finest).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        meshes.push(part.mesh(rp));
        differences.push(d);
    }
    let fit = if differences.iter().all(|&d| d == 0.0) {
        RateFit::exact_sentinel()
    } else {
        loglog_fit(&meshes, &differences)
    };
    Ok(RefinementReport { meshes, differences, fit })
}
