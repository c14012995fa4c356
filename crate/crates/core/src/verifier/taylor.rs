use super::{ModeData, Window};
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, RateFit};
use crate::gamma::NoiseModel;
use crate::roughpath::RoughPath;
use crate::spectral::SpectralField;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `‖δΓ_{uv}φ − Γ_u Σ_i(δβ^i B̃_iφ − ((v−u)/2)B̃_i²φ + Σ_k ½B̃_iB̃_kφ δβ^kδβ^i)‖_{L²}`
/// for fine nodes `u < v`.
pub fn delta_gamma_taylor_check(noise: &NoiseModel, rp: &RoughPath, phi: &SpectralField, u: usize, v: usize) -> Result<f64> {
    let md = ModeData::new(noise, phi)?;
    taylor_defect(&md, noise, rp, u, v)
}

fn taylor_defect(md: &ModeData, noise: &NoiseModel, rp: &RoughPath, u: usize, v: usize) -> Result<f64> {
    if !(u < v && v <= rp.grid().steps()) {
        return Err(Error::InvalidArgument(format!("need grid nodes u < v, got {u}, {v}")));
    }
    let g = rp.grid();
    let (tu, tv) = (g.time(u), g.time(v));
    let (bu, bv) = (rp.path().values_at(u), rp.path().values_at(v));
    let d = rp.path().increment(u, v);
    let h = tv - tu;
    let mut sq = 0.0;
    for (m, &k) in md.modes.iter().enumerate() {
        let b = &md.symbols[m];
        let lin: Complex64 = b.iter().zip(&d).map(|(b, d)| b * d).sum();
        let quad: Complex64 = b.iter().map(|b| b * b).sum();
        let gu = noise.gamma_symbol(k, &bu, tu);
        let exact = noise.gamma_symbol(k, &bv, tv) - gu;
        let expansion = gu * (lin - quad * (0.5 * h) + lin * lin * 0.5);
        let defect = exact - expansion;
        sq += defect.norm_sqr() * md.phi[m].iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok((sq * md.volume).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub lengths: Vec<f64>,
    /// Root-mean-square defect over all aligned intervals of each length.
    pub rms_defects: Vec<f64>,
    pub fit: RateFit,
}

/// Defects over intervals of `1, 2, …, 2^{levels−1}` fine steps tiling the window.
pub fn taylor_rate(noise: &NoiseModel, rp: &RoughPath, phi: &SpectralField, window: Window, levels: usize) -> Result<TaylorReport> {
    let md = ModeData::new(noise, phi)?;
    let (mut lengths, mut rms_defects) = (Vec::new(), Vec::new());
    for l in 0..levels {
        let step = 1usize << l;
        if window.len() < step {
            return Err(Error::DegenerateWindow(format!("window of {} steps is shorter than {step}", window.len())));
        }
        let starts: Vec<usize> = (window.start..=window.end - step).step_by(step).collect();
        let sq: Vec<f64> = starts.par_iter().map(|&u| taylor_defect(&md, noise, rp, u, u + step).map(|d| d * d)).collect::<Result<_>>()?;
        lengths.push(step as f64 * rp.grid().dt());
        rms_defects.push((sq.iter().sum::<f64>() / sq.len() as f64).sqrt());
    }
    let fit = loglog_fit(&lengths, &rms_defects);
    Ok(TaylorReport { lengths, rms_defects, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roughpath::{enhance, DrivingPath, FineTimeGrid, Flavor};
    use crate::solver::tests as st;
    use crate::verifier::tests::{phi, rough};

    #[test]
    fn scalar_noise_matches_scalar_remainder() {
        let g = st::grid();
        let rp = rough(5, 1024);
        let lam = [0.8, -0.5];
        let noise = NoiseModel::scalar(g, &lam).unwrap();
        let p = phi(g);
        for (u, v) in [(300, 301), (300, 332), (100, 900)] {
            let got = delta_gamma_taylor_check(&noise, &rp, &p, u, v).unwrap();
            let gr = rp.grid();
            let (bu, d) = (rp.path().values_at(u), rp.path().increment(u, v));
            let h = gr.time(v) - gr.time(u);
            let lsq = lam[0] * lam[0] + lam[1] * lam[1];
            let m_u = (lam[0] * bu[0] + lam[1] * bu[1] - 0.5 * gr.time(u) * lsq).exp();
            let x = lam[0] * d[0] + lam[1] * d[1];
            let expect = m_u * ((x - 0.5 * h * lsq).exp() - 1.0 - (x - 0.5 * h * lsq + 0.5 * x * x)).abs();
            assert!((got - expect).abs() <= 1e-10 * expect.max(1e-300), "{got} vs {expect}");
        }
    }

    #[test]
    fn constant_path_fits_exponent_two() {
        let g = st::grid();
        let grid = FineTimeGrid::new(1.0, 4096).unwrap();
        let rp = enhance(DrivingPath::from_lattice(grid, 2, 0, vec![0; 2 * 4097]).unwrap(), Flavor::Ito);
        let r = taylor_rate(&st::noise(g), &rp, &phi(g), Window::central(&grid).unwrap(), 5).unwrap();
        assert!((r.fit.slope - 2.0).abs() < 0.2, "{r:?}");
    }

    #[test]
    fn brownian_fits_exponent_above_one() {
        let g = st::grid();
        let rp = rough(6, 4096);
        let r = taylor_rate(&st::noise(g), &rp, &phi(g), Window::central(rp.grid()).unwrap(), 5).unwrap();
        assert!(r.fit.slope > 1.0, "{r:?}");
        assert!(r.fit.slope < 1.8, "{r:?}");
    }
}
