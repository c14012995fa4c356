use super::{cumulative_scalar, SolutionTrajectory};
use crate::error::{Error, Result};
use crate::spectral::{laplacian, BoxGrid, SpectralField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `d · Π_a (1 + cos(2π(x_a − c_a)/L))^m`, normalized to unit `L²` norm.
/// Its Fourier support is `|k_a| <= m`.
pub fn band_limited_bump(grid: BoxGrid, center: [f64; 3], direction: [f64; 3], order: usize) -> Result<SpectralField> {
    if order == 0 || 2 * order >= grid.n() {
        return Err(Error::InvalidArgument(format!("bump order {order} not resolved on n = {}", grid.n())));
    }
    let len = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    if !(len > 0.0) {
        return Err(Error::InvalidArgument("bump direction must be nonzero".into()));
    }
    let m = order as i64;
    let w = 2.0 * PI / grid.side();
    let factor = |k: i64, c: f64| -> Complex64 {
        if k.abs() > m {
            return Complex64::new(0.0, 0.0);
        }
        let mag = binomial(2 * order, (m + k) as usize) / 2f64.powi(order as i32);
        Complex64::from_polar(mag, -w * k as f64 * c)
    };
    let mut out = SpectralField::zeros(grid);
    for i in 0..grid.len() {
        let k = grid.wavevector(i);
        let s = factor(k[0], center[0]) * factor(k[1], center[1]) * factor(k[2], center[2]);
        for c in 0..3 {
            out.comps[c][i] = s * (direction[c] / len);
        }
    }
    let norm = out.inner(&out).sqrt();
    Ok(out.scale(1.0 / norm))
}

/// `count` bumps with uniform centers and directions, fixed seed.
pub fn random_bumps(grid: BoxGrid, count: usize, order: usize, seed: u64) -> Result<Vec<SpectralField>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c = [0; 3].map(|_| rng.random_range(0.0..grid.side()));
            let d = [0; 3].map(|_| rng.random_range(-1.0..1.0));
            band_limited_bump(grid, c, d, order)
        })
        .collect()
}

/// `|⟨y_t,φ⟩ − ⟨U₀,φ⟩ − ∫₀ᵗ ⟨y_s,Δφ⟩ + ⟨Γ_s⁻¹M(Γ_sy_s),φ⟩ ds|` at solver node `node`,
/// with the time integral by the solver's graded rule.
pub fn weak_residual(traj: &SolutionTrajectory, phis: &[SpectralField], node: usize) -> Result<Vec<f64>> {
    if node >= traj.mesh.nodes() {
        return Err(Error::InvalidArgument(format!("node {node} beyond the solver mesh")));
    }
    phis.iter()
        .map(|phi| {
            traj.u0().check_grid(phi)?;
            let lap = laplacian(phi);
            let g: Vec<f64> = traj.y.iter().zip(&traj.integrand).map(|(y, f)| y.inner(&lap) + f.inner(phi)).collect();
            let integral = cumulative_scalar(&traj.mesh, &g, traj.config.exponent())?[node];
            Ok((traj.y[node].inner(phi) - traj.u0().inner(phi) - integral).abs())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::loglog_fit;
    use crate::solver::tests::{cfg, grid, path_gamma, smooth_field};
    use crate::solver::{picard_solve, IdentityGamma, Nonlinearity, SolveOptions};
    use crate::spectral::{lp_norm_spectral, PhysicalField};

    #[test]
    fn bump_matches_physical_formula() {
        let g = grid();
        let (c, d, m) = ([3.0, 17.5, 30.0], [1.0, -2.0, 0.5], 3);
        let phi = band_limited_bump(g, c, d, m).unwrap();
        let w = 2.0 * PI / g.side();
        let raw = SpectralField::from_physical(&PhysicalField::from_fn(g, |x| {
            let b: f64 = (0..3).map(|a| (1.0 + (w * (x[a] - c[a])).cos()).powi(m as i32)).product();
            d.map(|di| di * b)
        }));
        let raw = raw.scale(1.0 / raw.inner(&raw).sqrt());
        assert!(phi.sub(&raw).max_abs() < 1e-14);
        assert!((phi.inner(&phi) - 1.0).abs() < 1e-13);
        assert!(phi.support().iter().all(|&i| g.wavevector(i).iter().all(|k| k.abs() <= 3)));
        assert!(band_limited_bump(g, c, d, 8).is_err());
        assert!(band_limited_bump(g, c, [0.0; 3], 2).is_err());
    }

    #[test]
    fn zero_trajectory_residual() {
        let g = grid();
        let opts = SolveOptions { nonlinearity: Nonlinearity::Zero, ..Default::default() };
        let traj = picard_solve(&cfg(16), &SpectralField::zeros(g), &IdentityGamma(g), None, opts).unwrap();
        let phis = random_bumps(g, 3, 2, 1).unwrap();
        assert!(weak_residual(&traj, &phis, 16).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn linear_single_mode_matches_quadrature_error() {
        let g = grid();
        let mut u0 = SpectralField::zeros(g);
        let (ip, im) = (g.flat([1, 0, 0]), g.flat([g.n() - 1, 0, 0]));
        u0.comps[1][ip] = Complex64::new(0.3, -0.4);
        u0.comps[1][im] = Complex64::new(0.3, 0.4);
        let u0 = u0.scale(1.0 / u0.inner(&u0).sqrt());
        let phi = band_limited_bump(g, [5.0, 9.0, 1.0], [0.2, 1.0, 0.0], 2).unwrap();
        let opts = SolveOptions { nonlinearity: Nonlinearity::Zero, ..Default::default() };
        let traj = picard_solve(&cfg(512), &u0, &IdentityGamma(g), None, opts).unwrap();
        let r = weak_residual(&traj, &[phi.clone()], 512).unwrap()[0];
        // ⟨e^{sΔ}U₀, Δφ⟩ = −c e^{−cs}⟨U₀,φ⟩ with c = |ξ|².
        let c = g.xi_sq(ip);
        let a0 = u0.inner(&phi);
        let h = 1.0 / 512.0;
        let mut rule = traj.mesh.first_cell_weight(traj.config.exponent()) * (-c * (-c * h * h).exp() * a0);
        for k in 1..512 {
            let s = (k as f64 * h).powi(2);
            rule += 2.0 * k as f64 * h * h * (-c * (-c * s).exp() * a0);
        }
        let exact = ((-c).exp() - 1.0) * a0;
        assert!((r - (rule - exact).abs()).abs() < 1e-12, "{r} vs {}", (rule - exact).abs());
        assert!(r < 1e-4, "{r}");
    }

    #[test]
    fn nonlinear_residual_is_first_order() {
        let g = grid();
        let base = smooth_field(g, 3);
        let u0 = base.scale(1e-3 / lp_norm_spectral(&base, 1.5).unwrap());
        let gamma = path_gamma(4);
        let phis = random_bumps(g, 5, 2, 7).unwrap();
        let steps = [32, 64, 128];
        let res: Vec<Vec<f64>> = steps
            .iter()
            .map(|&j| {
                let traj = picard_solve(&cfg(j), &u0, &gamma, None, SolveOptions::default()).unwrap();
                weak_residual(&traj, &phis, j).unwrap()
            })
            .collect();
        for k in 0..phis.len() {
            let xs: Vec<f64> = steps.iter().map(|&j| 1.0 / j as f64).collect();
            let ys: Vec<f64> = res.iter().map(|r| r[k]).collect();
            let fit = loglog_fit(&xs, &ys);
            assert!((fit.slope - 1.0).abs() < 0.3, "φ{k}: {ys:?} slope {}", fit.slope);
        }
    }
}
