//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use vortex_core::spectral::{biot_savart, curl, BoxGrid, PhysicalField, SpectralField};

/// Direct rectangle quadrature of `−(1/4π) ∫ (x−y)/|x−y|³ × U(y) dy` with the
/// kernel truncated to the minimum-image box. The singular self cell is
/// replaced by its leading-order value `−(C h²/12π) curl U(x)` with
/// `C = ∫_{[−½,½]³} |r|⁻¹ dr`.
pub fn real_space_biot_savart_at(u: &PhysicalField, curl_u: &PhysicalField, targets: &[usize]) -> Vec<[f64; 3]> {
    const CELL_INVERSE_R: f64 = 2.380_077_363_4;
    let g = u.grid;
    let l = g.side();
    let h = g.dx();
    let dv = g.cell_volume();
    let min_image = |d: f64| d - l * (d / l).round();
    targets
        .iter()
        .map(|&xi| {
            let x = g.position(xi);
            let mut acc = [0.0; 3];
            for yi in 0..g.len() {
                if yi == xi {
                    continue;
                }
                let y = g.position(yi);
                let r = [min_image(x[0] - y[0]), min_image(x[1] - y[1]), min_image(x[2] - y[2])];
                let r3 = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).powf(1.5);
                let v = [u.comps[0][yi], u.comps[1][yi], u.comps[2][yi]];
                let c = [r[1] * v[2] - r[2] * v[1], r[2] * v[0] - r[0] * v[2], r[0] * v[1] - r[1] * v[0]];
                for k in 0..3 {
                    acc[k] += c[k] / r3;
                }
            }
            let self_cell = CELL_INVERSE_R * h * h / 3.0;
            std::array::from_fn(|k| -(acc[k] * dv + self_cell * curl_u.comps[k][xi]) / (4.0 * PI))
        })
        .collect()
}

/// Trigonometric interpolation onto a grid `factor` times finer.
pub fn upsample(u: &SpectralField, factor: usize) -> SpectralField {
    let g = u.grid;
    let fine = BoxGrid::new(g.side(), g.n() * factor).unwrap();
    let mut out = SpectralField::zeros(fine);
    for i in 0..g.len() {
        let k = g.wavevector(i);
        let j = fine.flat([fine.index_of_wavenumber(k[0]), fine.index_of_wavenumber(k[1]), fine.index_of_wavenumber(k[2])]);
        for c in 0..3 {
            out.comps[c][j] = u.comps[c][i];
        }
    }
    out
}

/// Compactly concentrated vortex ring: `U = curl(0, 0, ψ)` with a Gaussian
/// stream function centred in the box.
pub fn blob(g: BoxGrid, sigma: f64) -> SpectralField {
    let c = g.side() / 2.0;
    let psi = PhysicalField::from_fn(g, |p| {
        let r2 = (p[0] - c).powi(2) + (p[1] - c).powi(2) + (p[2] - c).powi(2);
        [0.0, 0.0, (-r2 / (2.0 * sigma * sigma)).exp()]
    });
    curl(&SpectralField::from_physical(&psi))
}

/// Relative `ℓ²` error of direct quadrature against the spectral field over
/// the coarse nodes of the mid-plane `x₃ = L/2`.
pub fn compare(u: &SpectralField, factor: usize) -> f64 {
    let g = u.grid;
    let spectral = biot_savart(u).to_physical();
    let fine_u = upsample(u, factor);
    let fg = fine_u.grid;
    let targets: Vec<(usize, usize)> = (0..g.len())
        .filter(|&i| g.split(i)[2] == g.n() / 2)
        .map(|i| {
            let s = g.split(i);
            (i, fg.flat([s[0] * factor, s[1] * factor, s[2] * factor]))
        })
        .collect();
    let fine_targets: Vec<usize> = targets.iter().map(|t| t.1).collect();
    let direct = real_space_biot_savart_at(&fine_u.to_physical(), &curl(&fine_u).to_physical(), &fine_targets);
    let mut num = 0.0;
    let mut den = 0.0;
    for ((coarse, _), d) in targets.iter().zip(&direct) {
        for c in 0..3 {
            num += (d[c] - spectral.comps[c][*coarse]).powi(2);
            den += spectral.comps[c][*coarse].powi(2);
        }
    }
    (num / den).sqrt()
}
