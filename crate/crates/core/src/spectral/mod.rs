//! Periodic-box spectral calculus on `n³` grids.
//!
//! Coefficient arrays are stored row-major over the three axes in FFT order
//! (`0, 1, …, n/2 − 1, −n/2, …, −1`). The forward transform carries the
//! `1/n³` normalization so the zero mode is the mean of the field.

mod fft;
mod multiplier;
mod ops;
pub mod store;

pub use multiplier::{FourierMultiplier, KernelSpec};
pub use ops::{
    biot_savart, curl, dealias, dealias_cutoff, divergence, heat_semigroup, laplacian, lp_norm, lp_norm_spectral, nonlinearity,
    partial_derivative, project_div_free,
};

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_BOX_SIDE: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    side: f64,
    n: usize,
}

impl BoxGrid {
    pub fn new(side: f64, n: usize) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidArgument(format!("box side must be positive, got {side}")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!("modes per axis must be even and >= 4, got {n}")));
        }
        Ok(Self { side, n })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(3)
    }

    pub fn cell_volume(&self) -> f64 {
        (self.side / self.n as f64).powi(3)
    }

    pub fn dx(&self) -> f64 {
        self.side / self.n as f64
    }

    /// Signed integer wavenumber for FFT-order position `idx`.
    pub fn wavenumber(&self, idx: usize) -> i64 {
        let n = self.n as i64;
        let i = idx as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn index_of_wavenumber(&self, k: i64) -> usize {
        let n = self.n as i64;
        (((k % n) + n) % n) as usize
    }

    pub fn is_nyquist(&self, idx: usize) -> bool {
        idx == self.n / 2
    }

    pub fn split(&self, flat: usize) -> [usize; 3] {
        let n = self.n;
        [flat / (n * n), (flat / n) % n, flat % n]
    }

    pub fn flat(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.n + idx[1]) * self.n + idx[2]
    }

    /// Integer wavevector of a flat position.
    pub fn wavevector(&self, flat: usize) -> [i64; 3] {
        let s = self.split(flat);
        [self.wavenumber(s[0]), self.wavenumber(s[1]), self.wavenumber(s[2])]
    }

    /// Physical wavevector `ξ = 2πk/L`.
    pub fn xi(&self, flat: usize) -> [f64; 3] {
        let f = 2.0 * std::f64::consts::PI / self.side;
        let k = self.wavevector(flat);
        [k[0] as f64 * f, k[1] as f64 * f, k[2] as f64 * f]
    }

    /// Wavevector used for odd operators: Nyquist components zeroed.
    pub fn xi_odd(&self, flat: usize) -> [f64; 3] {
        let s = self.split(flat);
        let mut xi = self.xi(flat);
        for a in 0..3 {
            if self.is_nyquist(s[a]) {
                xi[a] = 0.0;
            }
        }
        xi
    }

    pub fn xi_sq(&self, flat: usize) -> f64 {
        let x = self.xi(flat);
        x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
    }

    /// Flat position of `−k`.
    pub fn negate(&self, flat: usize) -> usize {
        let n = self.n;
        let s = self.split(flat);
        self.flat([(n - s[0]) % n, (n - s[1]) % n, (n - s[2]) % n])
    }

    /// Physical coordinate of node `flat`.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let s = self.split(flat);
        let dx = self.dx();
        [s[0] as f64 * dx, s[1] as f64 * dx, s[2] as f64 * dx]
    }

    /// True when no axis sits at the Nyquist index.
    pub fn is_resolved(&self, flat: usize) -> bool {
        self.split(flat).iter().all(|&i| !self.is_nyquist(i))
    }

    fn check_same(&self, other: &BoxGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "box L={} n={} vs L={} n={}",
                self.side, self.n, other.side, other.n
            )));
        }
        Ok(())
    }
}

/// Three real component arrays on the physical grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    pub grid: BoxGrid,
    pub comps: [Vec<f64>; 3],
}

impl PhysicalField {
    pub fn zeros(grid: BoxGrid) -> Self {
        let z = vec![0.0; grid.len()];
        Self { grid, comps: [z.clone(), z.clone(), z] }
    }

    pub fn from_fn(grid: BoxGrid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for i in 0..grid.len() {
            let v = f(grid.position(i));
            for c in 0..3 {
                out.comps[c][i] = v[c];
            }
        }
        out
    }
}

/// Replaces `c` by `(c(k) + conj c(−k))/2`, which is exactly Hermitian.
pub(crate) fn hermitian_part(c: &mut [Complex64], grid: &BoxGrid) {
    for i in 0..grid.len() {
        let j = grid.negate(i);
        if j > i {
            let a = (c[i] + c[j].conj()) * 0.5;
            c[i] = a;
            c[j] = a.conj();
        } else if j == i {
            c[i].im = 0.0;
        }
    }
}

/// Fourier coefficients of a 3-component field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: BoxGrid,
    pub comps: [Vec<Complex64>; 3],
}

impl SpectralField {
    pub fn zeros(grid: BoxGrid) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self { grid, comps: [z.clone(), z.clone(), z] }
    }

    /// Forward transform with `1/n³` normalization.
    pub fn from_physical(field: &PhysicalField) -> Self {
        let grid = field.grid;
        let comps = std::array::from_fn(|c| {
            let mut buf: Vec<Complex64> = field.comps[c].iter().map(|&x| Complex64::new(x, 0.0)).collect();
            fft::transform_3d(&mut buf, grid.n(), false);
            let s = 1.0 / grid.len() as f64;
            buf.iter_mut().for_each(|z| *z *= s);
            hermitian_part(&mut buf, &grid);
            buf
        });
        Self { grid, comps }
    }

    /// Inverse transform; imaginary parts (roundoff for Hermitian input) dropped.
    pub fn to_physical(&self) -> PhysicalField {
        let comps = std::array::from_fn(|c| {
            let mut buf = self.comps[c].clone();
            fft::transform_3d(&mut buf, self.grid.n(), true);
            buf.into_iter().map(|z| z.re).collect()
        });
        PhysicalField { grid: self.grid, comps }
    }

    pub fn check_grid(&self, other: &SpectralField) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest `|c(−k) − conj c(k)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.grid;
        let mut worst = 0.0f64;
        for comp in &self.comps {
            for i in 0..g.len() {
                worst = worst.max((comp[g.negate(i)] - comp[i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect() <= 1e-12 * self.max_abs().max(f64::MIN_POSITIVE)
    }

    pub fn map_modes(&self, mut f: impl FnMut(usize, [Complex64; 3]) -> [Complex64; 3]) -> Self {
        let mut out = SpectralField::zeros(self.grid);
        for i in 0..self.grid.len() {
            let v = f(i, [self.comps[0][i], self.comps[1][i], self.comps[2][i]]);
            for c in 0..3 {
                out.comps[c][i] = v[c];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_modes(|_, v| v.map(|z| z * s))
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        self.map_modes(|i, v| [v[0] + other.comps[0][i], v[1] + other.comps[1][i], v[2] + other.comps[2][i]])
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        self.map_modes(|i, v| [v[0] - other.comps[0][i], v[1] - other.comps[1][i], v[2] - other.comps[2][i]])
    }

    /// `(1 − w)·self + w·other`, used for interpolation.
    pub fn lerp(&self, other: &SpectralField, w: f64) -> Self {
        self.map_modes(|i, v| {
            std::array::from_fn(|c| v[c] * (1.0 - w) + other.comps[c][i] * w)
        })
    }

    /// `L²` inner product `⟨u, v⟩ = ∫ u·v dx`, via Parseval.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        let mut s = 0.0;
        for c in 0..3 {
            for (a, b) in self.comps[c].iter().zip(&other.comps[c]) {
                s += (a * b.conj()).re;
            }
        }
        s * self.grid.volume()
    }

    /// Modes where any component is nonzero.
    pub fn support(&self) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&i| self.comps.iter().any(|c| c[i] != Complex64::new(0.0, 0.0)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    pub(crate) fn random_physical(grid: BoxGrid, seed: u64) -> PhysicalField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = PhysicalField::zeros(grid);
        for c in 0..3 {
            for x in f.comps[c].iter_mut() {
                *x = rng.random_range(-1.0..1.0);
            }
        }
        f
    }

    #[test]
    fn grid_validation() {
        assert!(BoxGrid::new(32.0, 6).is_ok());
        assert!(BoxGrid::new(32.0, 2).is_err());
        assert!(BoxGrid::new(32.0, 7).is_err());
        assert!(BoxGrid::new(-1.0, 8).is_err());
        let g = BoxGrid::new(32.0, 8).unwrap();
        assert_eq!(g.wavenumber(4), -4);
        assert_eq!(g.wavenumber(7), -1);
        assert_eq!(g.index_of_wavenumber(-3), 5);
    }

    #[test]
    fn constant_field_has_only_mean_mode() {
        let g = BoxGrid::new(32.0, 8).unwrap();
        let f = SpectralField::from_physical(&PhysicalField::from_fn(g, |_| [2.5, 0.0, -1.0]));
        assert!((f.comps[0][0] - Complex64::new(2.5, 0.0)).norm() < 1e-15);
        assert!((f.comps[2][0] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        for i in 1..g.len() {
            assert!(f.comps[0][i].norm() < 1e-15);
        }
    }

    #[test]
    fn plane_wave_splits_into_conjugate_pair() {
        let g = BoxGrid::new(32.0, 8).unwrap();
        let f = SpectralField::from_physical(&PhysicalField::from_fn(g, |x| [(2.0 * PI * x[0] / 32.0).cos(), 0.0, 0.0]));
        let plus = g.flat([1, 0, 0]);
        let minus = g.flat([7, 0, 0]);
        assert!((f.comps[0][plus] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((f.comps[0][minus] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(f.is_hermitian());
    }

    #[test]
    fn roundtrip_random_field() {
        let g = BoxGrid::new(32.0, 16).unwrap();
        let p = random_physical(g, 3);
        let back = SpectralField::from_physical(&p).to_physical();
        let err = (0..3)
            .flat_map(|c| p.comps[c].iter().zip(&back.comps[c]).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn parseval_inner_product() {
        let g = BoxGrid::new(32.0, 8).unwrap();
        let a = random_physical(g, 1);
        let b = random_physical(g, 2);
        let direct: f64 = (0..3)
            .map(|c| a.comps[c].iter().zip(&b.comps[c]).map(|(x, y)| x * y).sum::<f64>())
            .sum::<f64>()
            * g.cell_volume();
        let spec = SpectralField::from_physical(&a).inner(&SpectralField::from_physical(&b));
        assert!((direct - spec).abs() < 1e-10 * direct.abs().max(1.0));
    }
}
