use super::{BoxGrid, PhysicalField, SpectralField};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// How a convolution kernel `h_i` is specified in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// Periodized Gaussian with standard deviation `sigma` and total mass `mass`.
    Gaussian { sigma: f64, mass: f64 },
    /// No convolution part.
    Zero,
    /// Discrete unit mass at the origin: `B_i` is the identity.
    Delta,
    /// Physical samples read from a field store (first component used).
    Store { path: String },
}

/// A scalar Fourier multiplier applied identically to all three components,
/// with the `L¹` mass of its physical kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMultiplier {
    pub grid: BoxGrid,
    pub values: Vec<Complex64>,
    /// `|h|₁` by rectangle quadrature on the grid.
    pub l1_mass: f64,
}

impl FourierMultiplier {
    pub fn zero(grid: BoxGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()], l1_mass: 0.0 }
    }

    /// From real kernel samples `h(x_j)`: `ĥ(ξ) = Σ_j h(x_j) e^{−iξ·x_j} ΔV`.
    pub fn from_kernel_samples(grid: BoxGrid, samples: &[f64]) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} samples for {} nodes", samples.len(), grid.len())));
        }
        let mut phys = PhysicalField::zeros(grid);
        phys.comps[0] = samples.to_vec();
        let spec = SpectralField::from_physical(&phys);
        let vol = grid.volume();
        let values = spec.comps[0].iter().map(|z| z * vol).collect();
        let l1_mass = samples.iter().map(|h| h.abs()).sum::<f64>() * grid.cell_volume();
        Ok(Self { grid, values, l1_mass })
    }

    /// From closed-form multiplier values; rejected unless `m(−k) = conj m(k)`.
    pub fn from_values(grid: BoxGrid, mut values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} modes", values.len(), grid.len())));
        }
        let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for i in 0..grid.len() {
            let d = (values[grid.negate(i)] - values[i].conj()).norm();
            if d > 1e-12 * scale {
                return Err(Error::NonHermitian(format!("mode {:?}: defect {d}", grid.wavevector(i))));
            }
        }
        super::hermitian_part(&mut values, &grid);
        let vol = grid.volume();
        let mut spec = SpectralField::zeros(grid);
        spec.comps[0] = values.iter().map(|z| z / vol).collect();
        let h = spec.to_physical();
        let l1_mass = h.comps[0].iter().map(|x| x.abs()).sum::<f64>() * grid.cell_volume();
        Ok(Self { grid, values, l1_mass })
    }

    pub fn delta(grid: BoxGrid) -> Self {
        let mut s = vec![0.0; grid.len()];
        s[0] = 1.0 / grid.cell_volume();
        Self::from_kernel_samples(grid, &s).expect("sizes match")
    }

    /// Periodized Gaussian sampled on the grid and renormalized to `mass`.
    pub fn gaussian(grid: BoxGrid, sigma: f64, mass: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !mass.is_finite() {
            return Err(Error::InvalidArgument(format!("gaussian kernel needs sigma > 0, got {sigma}")));
        }
        let l = grid.side();
        let images = (6.0 * sigma / l).ceil() as i64;
        let mut samples = vec![0.0; grid.len()];
        for (j, s) in samples.iter_mut().enumerate() {
            let x = grid.position(j);
            let mut acc = 0.0;
            for a in -images..=images {
                for b in -images..=images {
                    for c in -images..=images {
                        let d = [x[0] + a as f64 * l, x[1] + b as f64 * l, x[2] + c as f64 * l];
                        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                        acc += (-r2 / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
            *s = acc;
        }
        let total: f64 = samples.iter().sum::<f64>() * grid.cell_volume();
        samples.iter_mut().for_each(|s| *s *= mass / total);
        Self::from_kernel_samples(grid, &samples)
    }

    pub fn from_spec(grid: BoxGrid, spec: &KernelSpec) -> Result<Self> {
        match spec {
            KernelSpec::Gaussian { sigma, mass } => Self::gaussian(grid, *sigma, *mass),
            KernelSpec::Zero => Ok(Self::zero(grid)),
            KernelSpec::Delta => Ok(Self::delta(grid)),
            KernelSpec::Store { path } => {
                let f = super::store::read_field(std::path::Path::new(path))?;
                if f.grid != grid {
                    return Err(Error::GridMismatch(format!("kernel store {path} has a different grid")));
                }
                Self::from_kernel_samples(grid, &f.to_physical().comps[0])
            }
        }
    }

    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField> {
        if u.grid != self.grid {
            return Err(Error::GridMismatch("multiplier and field grids differ".into()));
        }
        Ok(u.map_modes(|i, v| v.map(|z| z * self.values[i])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::lp_norm;
    use crate::spectral::tests::random_physical;

    #[test]
    fn delta_kernel_is_identity() {
        let g = BoxGrid::new(32.0, 8).unwrap();
        let m = FourierMultiplier::delta(g);
        assert!(m.values.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-13));
        let u = SpectralField::from_physical(&random_physical(g, 1));
        assert!(m.apply(&u).unwrap().sub(&u).max_abs() < 1e-13);
        assert!((m.l1_mass - 1.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_zero_mode_is_mass() {
        let g = BoxGrid::new(32.0, 16).unwrap();
        let m = FourierMultiplier::gaussian(g, 3.0, 0.7).unwrap();
        assert!((m.values[0].re - 0.7).abs() < 1e-13);
        assert!((m.l1_mass - 0.7).abs() < 1e-13);
        assert!(m.values.iter().all(|z| z.im.abs() < 1e-14));
    }

    #[test]
    fn non_hermitian_rejected() {
        let g = BoxGrid::new(32.0, 8).unwrap();
        let mut v = vec![Complex64::new(1.0, 0.0); g.len()];
        v[1] = Complex64::new(1.0, 0.5);
        assert!(matches!(FourierMultiplier::from_values(g, v), Err(Error::NonHermitian(_))));
        let gauss: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new((-4.0 * g.xi_sq(i)).exp(), 0.0)).collect();
        let ok = FourierMultiplier::from_values(g, gauss).unwrap();
        assert!(ok.l1_mass > 0.9 && ok.l1_mass < 1.1);
    }

    #[test]
    fn young_inequality_on_random_fields() {
        let g = BoxGrid::new(32.0, 8).unwrap();
        let m = FourierMultiplier::gaussian(g, 2.5, 1.3).unwrap();
        for seed in 0..100 {
            let x = random_physical(g, seed);
            let hx = m.apply(&SpectralField::from_physical(&x)).unwrap().to_physical();
            for p in [1.5, 2.0, 3.0] {
                let lhs = lp_norm(&hx, p).unwrap();
                let rhs = m.l1_mass * lp_norm(&x, p).unwrap();
                assert!(lhs <= rhs * (1.0 + 1e-12), "p={p}: {lhs} > {rhs}");
            }
        }
    }
}
