//! The noise transformation `Γ_t = Π_i exp(β^i_t B̃_i − (t/2) B̃_i²)`, with
//! `B̃_i = B_i + λ_i I`, realized as a Fourier multiplier, plus the
//! Young-inequality bound on `η_t` and the small-data gate.

use crate::error::{Error, Result};
use crate::spectral::{lp_norm_spectral, BoxGrid, FourierMultiplier, SpectralField};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// `√12 + 3`, the threshold ratio `|λ_i| / |h_i|₁` for global existence.
pub const THRESHOLD_RATIO: f64 = 6.464_101_615_137_754;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseChannel {
    pub kernel: FourierMultiplier,
    pub lambda: f64,
}

impl NoiseChannel {
    /// `B̃_i` at one mode: `ĥ_i(ξ) + λ_i`.
    pub fn symbol(&self, mode: usize) -> Complex64 {
        self.kernel.values[mode] + self.lambda
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub grid: BoxGrid,
    pub channels: Vec<NoiseChannel>,
    pub global_mode: bool,
}

impl NoiseModel {
    pub fn new(grid: BoxGrid, channels: Vec<NoiseChannel>, global_mode: bool) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidArgument("noise model needs at least one channel".into()));
        }
        if channels.iter().any(|c| c.kernel.grid != grid) {
            return Err(Error::GridMismatch("noise kernel grid differs from the box".into()));
        }
        let model = Self { grid, channels, global_mode };
        if global_mode {
            let bad: Vec<String> = threshold_check(&model)
                .iter()
                .enumerate()
                .filter(|(_, m)| **m <= 0.0)
                .map(|(i, m)| format!("channel {}: |λ| − (√12+3)|h|₁ = {m:.6} <= 0", i + 1))
                .collect();
            if !bad.is_empty() {
                return Err(Error::Config(bad));
            }
        }
        Ok(model)
    }

    /// Pure scalar noise `B̃_i = λ_i I`.
    pub fn scalar(grid: BoxGrid, lambdas: &[f64]) -> Result<Self> {
        let channels = lambdas
            .iter()
            .map(|&lambda| NoiseChannel { kernel: FourierMultiplier::zero(grid), lambda })
            .collect();
        Self::new(grid, channels, false)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// `Γ_t` symbol at one mode, factors multiplied in channel order.
    pub fn gamma_symbol(&self, mode: usize, beta: &[f64], t: f64) -> Complex64 {
        self.channels
            .iter()
            .zip(beta)
            .map(|(c, &b)| {
                let s = c.symbol(mode);
                (s * b - s * s * (0.5 * t)).exp()
            })
            .fold(Complex64::new(1.0, 0.0), |acc, f| acc * f)
    }

    /// `Γ_t⁻¹` symbol at one mode.
    pub fn gamma_inverse_symbol(&self, mode: usize, beta: &[f64], t: f64) -> Complex64 {
        self.channels
            .iter()
            .zip(beta)
            .map(|(c, &b)| {
                let s = c.symbol(mode);
                (-s * b + s * s * (0.5 * t)).exp()
            })
            .fold(Complex64::new(1.0, 0.0), |acc, f| acc * f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaOperator {
    pub time: f64,
    pub grid: BoxGrid,
    pub forward: Vec<Complex64>,
    pub inverse: Vec<Complex64>,
}

pub fn build_gamma(noise: &NoiseModel, beta: &[f64], t: f64) -> Result<GammaOperator> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("Γ_t needs t >= 0, got {t}")));
    }
    if beta.len() != noise.len() {
        return Err(Error::InvalidArgument(format!("{} path values for {} channels", beta.len(), noise.len())));
    }
    let g = noise.grid;
    let forward = (0..g.len()).map(|i| noise.gamma_symbol(i, beta, t)).collect();
    let inverse = (0..g.len()).map(|i| noise.gamma_inverse_symbol(i, beta, t)).collect();
    Ok(GammaOperator { time: t, grid: g, forward, inverse })
}

pub fn apply_gamma(op: &GammaOperator, u: &SpectralField, direction: Direction) -> Result<SpectralField> {
    if u.grid != op.grid {
        return Err(Error::GridMismatch("Γ operator and field live on different grids".into()));
    }
    let m = match direction {
        Direction::Forward => &op.forward,
        Direction::Inverse => &op.inverse,
    };
    Ok(u.map_modes(|i, v| v.map(|z| z * m[i])))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaBound {
    /// Young-inequality upper bound `η̄_t`.
    pub bound: f64,
    /// `‖Γ_t‖²_{L²→L²} ‖Γ_t⁻¹‖_{L²→L²}` from the multiplier sup on the grid.
    pub exact_l2: f64,
}

/// Checks `3/2 < p < 2` and `1/q = 2/p − 1/3`.
pub fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p > 1.5 && p < 2.0) {
        return Err(Error::Exponents(format!("p must lie in (3/2, 2), got {p}")));
    }
    if !(q > 1.0) || (1.0 / q - (2.0 / p - 1.0 / 3.0)).abs() > 1e-12 {
        return Err(Error::Exponents(format!("q must satisfy 1/q = 2/p − 1/3, got p={p}, q={q}")));
    }
    Ok(())
}

pub fn conjugate_exponent(p: f64) -> f64 {
    1.0 / (2.0 / p - 1.0 / 3.0)
}

/// Upper bound on `η_t` from `‖exp(aB_i)‖ ≤ exp(|a||h_i|₁)`:
/// `Π_i exp(λ_iβ^i − (t/2)λ_i² + 3(|β^i − tλ_i||h_i|₁ + (t/2)|h_i|₁²))`.
pub fn eta_upper_bound(noise: &NoiseModel, beta: &[f64], t: f64, p: f64, q: f64) -> Result<EtaBound> {
    check_exponents(p, q)?;
    let op = build_gamma(noise, beta, t)?;
    Ok(eta_from_operator(noise, beta, t, &op))
}

fn eta_from_operator(noise: &NoiseModel, beta: &[f64], t: f64, op: &GammaOperator) -> EtaBound {
    let mut log_bound = 0.0;
    for (c, &b) in noise.channels.iter().zip(beta) {
        let h1 = c.kernel.l1_mass;
        log_bound += c.lambda * b - 0.5 * t * c.lambda * c.lambda + 3.0 * ((b - t * c.lambda).abs() * h1 + 0.5 * t * h1 * h1);
    }
    let sup_f = op.forward.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let sup_i = op.inverse.iter().map(|z| z.norm()).fold(0.0, f64::max);
    EtaBound { bound: log_bound.exp(), exact_l2: sup_f * sup_f * sup_i }
}

/// `η̄_t` at every `stride`-th node of a driving path, with its running sup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSeries {
    pub times: Vec<f64>,
    pub values: Vec<EtaBound>,
    pub running_sup: Vec<f64>,
}

impl EtaSeries {
    pub fn sup(&self) -> f64 {
        self.running_sup.last().copied().unwrap_or(0.0)
    }
}

pub fn eta_series(noise: &NoiseModel, path: &crate::roughpath::DrivingPath, p: f64, q: f64, stride: usize) -> Result<EtaSeries> {
    check_exponents(p, q)?;
    if path.channels() != noise.len() {
        return Err(Error::InvalidArgument("driving path and noise model disagree on N".into()));
    }
    let stride = stride.max(1);
    let grid = path.grid();
    let nodes: Vec<usize> = (0..grid.nodes()).step_by(stride).chain(std::iter::once(grid.steps())).collect();
    let mut nodes = nodes;
    nodes.dedup();
    let values: Vec<EtaBound> = {
        use rayon::prelude::*;
        nodes
            .par_iter()
            .map(|&j| {
                let beta = path.values_at(j);
                let t = grid.time(j);
                let op = build_gamma(noise, &beta, t).expect("validated inputs");
                eta_from_operator(noise, &beta, t, &op)
            })
            .collect()
    };
    let mut sup = 0.0f64;
    let running_sup = values
        .iter()
        .map(|v| {
            sup = sup.max(v.bound);
            sup
        })
        .collect();
    Ok(EtaSeries { times: nodes.iter().map(|&j| grid.time(j)).collect(), values, running_sup })
}

/// Per-channel margin `|λ_i| − (√12+3)|h_i|₁`; the gate needs all of them positive.
pub fn threshold_check(noise: &NoiseModel) -> Vec<f64> {
    noise.channels.iter().map(|c| c.lambda.abs() - THRESHOLD_RATIO * c.kernel.l1_mass).collect()
}

/// Coefficient of `t` in `log η̄_t` along `β ≈ 0`: `−λ²/2 + 3(|λ||h|₁ + |h|₁²/2)`.
pub fn deterministic_exponent(lambda: f64, h1: f64) -> f64 {
    -0.5 * lambda * lambda + 3.0 * (lambda.abs() * h1 + 0.5 * h1 * h1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub eta_sup: f64,
    pub u0_norm: f64,
    pub product: f64,
    pub c_star: f64,
    pub pass: bool,
    pub margins: Vec<f64>,
}

/// Passes iff `η̄_sup · |U₀|_{3/2} ≤ C*`.
pub fn smallness_gate(u0: &SpectralField, eta_sup: f64, c_star: f64, margins: Vec<f64>) -> Result<GateReport> {
    let u0_norm = lp_norm_spectral(u0, 1.5)?;
    Ok(gate_from_norm(u0_norm, eta_sup, c_star, margins))
}

pub fn gate_from_norm(u0_norm: f64, eta_sup: f64, c_star: f64, margins: Vec<f64>) -> GateReport {
    let product = eta_sup * u0_norm;
    GateReport { eta_sup, u0_norm, product, c_star, pass: product <= c_star, margins }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> BoxGrid {
        BoxGrid::new(32.0, 8).unwrap()
    }

    fn random_noise(seed: u64) -> NoiseModel {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channels = (0..2)
            .map(|_| NoiseChannel {
                kernel: FourierMultiplier::gaussian(g, rng.random_range(1.5..4.0), rng.random_range(0.05..0.3)).unwrap(),
                lambda: rng.random_range(-3.0..3.0),
            })
            .collect();
        NoiseModel::new(g, channels, false).unwrap()
    }

    fn random_field(seed: u64) -> SpectralField {
        crate::spectral::project_div_free(&SpectralField::from_physical(&crate::spectral::PhysicalField::from_fn(
            grid(),
            |x| {
                let s = seed as f64;
                [(0.2 * x[1] + s).sin(), (0.2 * x[2] * 2.0 - s).cos(), (0.2 * x[0] + 0.4 * x[1]).sin()]
            },
        )))
    }

    #[test]
    fn identity_at_origin() {
        let op = build_gamma(&random_noise(1), &[0.0, 0.0], 0.0).unwrap();
        assert!(op.forward.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn scalar_noise_is_mode_independent() {
        let noise = NoiseModel::scalar(grid(), &[0.7, -1.2]).unwrap();
        let (beta, t) = ([0.3, -0.8], 0.6);
        let op = build_gamma(&noise, &beta, t).unwrap();
        let expect = (0.7 * 0.3 + 1.2 * 0.8 - 0.5 * t * (0.49 + 1.44f64)).exp();
        for z in &op.forward {
            assert!((z.re - expect).abs() <= 1e-13 * expect && z.im == 0.0);
        }
        let u = random_field(3);
        let direct = u.scale(expect);
        let via = apply_gamma(&op, &u, Direction::Forward).unwrap();
        assert!(via.sub(&direct).max_abs() <= 1e-13 * direct.max_abs());
    }

    #[test]
    fn reciprocal_and_commutation() {
        for seed in 0..5 {
            let noise = random_noise(seed);
            let beta = [0.4 - seed as f64 * 0.2, 0.9];
            let op = build_gamma(&noise, &beta, 0.7).unwrap();
            for i in 0..grid().len() {
                assert!((op.forward[i] * op.inverse[i] - 1.0).norm() < 1e-12);
            }
            let mut rev = noise.clone();
            rev.channels.reverse();
            let rop = build_gamma(&rev, &[beta[1], beta[0]], 0.7).unwrap();
            for i in 0..grid().len() {
                assert!((op.forward[i] - rop.forward[i]).norm() <= 1e-13 * op.forward[i].norm());
            }
        }
    }

    #[test]
    fn apply_roundtrip_and_identity() {
        let noise = random_noise(7);
        let u = random_field(1);
        let id = build_gamma(&noise, &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(apply_gamma(&id, &u, Direction::Forward).unwrap(), u);
        let op = build_gamma(&noise, &[1.1, -0.4], 0.9).unwrap();
        let back = apply_gamma(&op, &apply_gamma(&op, &u, Direction::Forward).unwrap(), Direction::Inverse).unwrap();
        assert!(back.sub(&u).max_abs() <= 1e-10 * u.max_abs());
        let other = SpectralField::zeros(BoxGrid::new(32.0, 4).unwrap());
        assert!(matches!(apply_gamma(&op, &other, Direction::Forward), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn eta_scalar_case_and_origin() {
        let (p, q) = (1.8, conjugate_exponent(1.8));
        let noise = NoiseModel::scalar(grid(), &[1.5]).unwrap();
        let e = eta_upper_bound(&noise, &[0.4], 0.3, p, q).unwrap();
        let expect = (1.5 * 0.4 - 0.5 * 0.3 * 2.25f64).exp();
        assert!((e.bound - expect).abs() < 1e-14 * expect);
        let e0 = eta_upper_bound(&random_noise(2), &[0.0, 0.0], 0.0, p, q).unwrap();
        assert!((e0.bound - 1.0).abs() < 1e-15);
        assert!(eta_upper_bound(&noise, &[0.4], 0.3, 2.5, q).is_err());
        assert!(eta_upper_bound(&noise, &[0.4], 0.3, 1.8, 1.3).is_err());
    }

    #[test]
    fn eta_bound_dominates_exact_l2() {
        let (p, q) = (1.8, conjugate_exponent(1.8));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = random_noise(4);
        for _ in 0..100 {
            let beta = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let t = rng.random_range(0.0..2.0);
            let e = eta_upper_bound(&noise, &beta, t, p, q).unwrap();
            assert!(e.bound >= e.exact_l2 * (1.0 - 1e-12), "{e:?}");
        }
    }

    #[test]
    fn threshold_examples() {
        let g = grid();
        let unit = |scale: f64| {
            let mut k = FourierMultiplier::gaussian(g, 2.0, 1.0).unwrap();
            k.l1_mass = scale;
            k
        };
        let pass = NoiseModel::new(g, vec![NoiseChannel { kernel: unit(1.0), lambda: 7.0 }], false).unwrap();
        assert!((threshold_check(&pass)[0] - 0.535_898_384_862_246).abs() < 1e-12);
        let fail = NoiseModel::new(g, vec![NoiseChannel { kernel: unit(1.0), lambda: 6.0 }], false).unwrap();
        assert!((threshold_check(&fail)[0] + 0.464_101_615_137_754).abs() < 1e-12);
        assert!((deterministic_exponent(6.0, 1.0) - 1.5).abs() < 1e-14);
        let zero = NoiseModel::scalar(g, &[0.3]).unwrap();
        assert_eq!(threshold_check(&zero), vec![0.3]);
        assert!(NoiseModel::new(g, vec![NoiseChannel { kernel: unit(1.0), lambda: 6.0 }], true).is_err());
        assert!((THRESHOLD_RATIO - (12f64.sqrt() + 3.0)).abs() < 1e-15);
    }

    #[test]
    fn threshold_sign_matches_exponent_sign() {
        for i in 0..20 {
            let lambda = 0.5 + i as f64 * 0.6;
            let h1 = 1.0;
            let margin = lambda.abs() - THRESHOLD_RATIO * h1;
            assert_eq!(margin > 0.0, deterministic_exponent(lambda, h1) < 0.0, "λ = {lambda}");
        }
    }

    #[test]
    fn gate_arithmetic_and_interval() {
        assert!(gate_from_norm(0.1, 2.0, 0.5, vec![]).pass);
        assert!(smallness_gate(&SpectralField::zeros(grid()), 5.0, 1e-9, vec![]).unwrap().pass);
        let u = random_field(2);
        let (eta, c) = (3.0, 0.01);
        let base = lp_norm_spectral(&u, 1.5).unwrap();
        let pass_at = |s: f64| smallness_gate(&u.scale(s), eta, c, vec![]).unwrap().pass;
        let (mut lo, mut hi) = (0.0, 1.0);
        assert!(pass_at(lo) && !pass_at(hi));
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if pass_at(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo * base - c / eta).abs() < 1e-9 * c / eta);
        for s in [0.1, 0.5, 0.9] {
            assert!(pass_at(s * lo));
        }
    }
}
