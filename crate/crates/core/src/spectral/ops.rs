use super::{BoxGrid, PhysicalField, SpectralField};
use crate::error::{Error, Result};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn times_i(z: Complex64, s: f64) -> Complex64 {
    Complex64::new(-z.im * s, z.re * s)
}

/// Checks symmetry of a derived field relative to the size of its input.
fn debug_hermitian(f: &SpectralField, input: &SpectralField) {
    if cfg!(debug_assertions) {
        let g = f.grid;
        let amplification = 1.0 + std::f64::consts::PI * g.n() as f64 / g.side() + g.side();
        let scale = f.max_abs().max(input.max_abs() * amplification);
        let defect = f.hermitian_defect();
        assert!(defect <= 1e-12 * scale, "Hermitian symmetry lost (defect {defect}, scale {scale})");
    }
}

/// Multiplies every mode by `exp(−|ξ|² t)`.
pub fn heat_semigroup(u: &SpectralField, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("heat semigroup needs t >= 0, got {t}")));
    }
    let g = u.grid;
    Ok(u.map_modes(|i, v| {
        let f = (-g.xi_sq(i) * t).exp();
        v.map(|z| z * f)
    }))
}

/// Mode-wise `−|ξ|²`.
pub fn laplacian(u: &SpectralField) -> SpectralField {
    let g = u.grid;
    u.map_modes(|i, v| {
        let f = -g.xi_sq(i);
        v.map(|z| z * f)
    })
}

/// `∂/∂x_axis`: multiplication by `iξ_axis`, Nyquist along that axis zeroed.
pub fn partial_derivative(u: &SpectralField, axis: usize) -> SpectralField {
    assert!(axis < 3, "axis must be 0, 1 or 2");
    let g = u.grid;
    let out = u.map_modes(|i, v| {
        let s = g.xi_odd(i)[axis];
        v.map(|z| times_i(z, s))
    });
    debug_hermitian(&out, u);
    out
}

fn cross_i(xi: [f64; 3], v: [Complex64; 3]) -> [Complex64; 3] {
    // iξ × v
    [
        I * (v[2] * xi[1] - v[1] * xi[2]),
        I * (v[0] * xi[2] - v[2] * xi[0]),
        I * (v[1] * xi[0] - v[0] * xi[1]),
    ]
}

/// `Û = iξ × X̂`.
pub fn curl(x: &SpectralField) -> SpectralField {
    let g = x.grid;
    let out = x.map_modes(|i, v| cross_i(g.xi_odd(i), v));
    debug_hermitian(&out, x);
    out
}

/// Per-mode `iξ·v` (zero mode and Nyquist components drop out).
pub fn divergence(u: &SpectralField) -> Vec<Complex64> {
    let g = u.grid;
    (0..g.len())
        .map(|i| {
            let xi = g.xi_odd(i);
            I * (u.comps[0][i] * xi[0] + u.comps[1][i] * xi[1] + u.comps[2][i] * xi[2])
        })
        .collect()
}

/// Periodic Biot–Savart law `X̂ = iξ × Û / |ξ|²`, `X̂(0) = 0`.
pub fn biot_savart(u: &SpectralField) -> SpectralField {
    let g = u.grid;
    let out = u.map_modes(|i, v| {
        let xi = g.xi_odd(i);
        let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if k2 == 0.0 {
            return [Complex64::new(0.0, 0.0); 3];
        }
        cross_i(xi, v).map(|z| z / k2)
    });
    debug_hermitian(&out, u);
    out
}

/// Leray projection onto divergence-free, mean-zero fields; modes touching a
/// Nyquist index are removed.
pub fn project_div_free(u: &SpectralField) -> SpectralField {
    let g = u.grid;
    u.map_modes(|i, v| {
        if i == 0 || !g.is_resolved(i) {
            return [Complex64::new(0.0, 0.0); 3];
        }
        let xi = g.xi(i);
        let k2 = g.xi_sq(i);
        let dot = (v[0] * xi[0] + v[1] * xi[1] + v[2] * xi[2]) / k2;
        [v[0] - dot * xi[0], v[1] - dot * xi[1], v[2] - dot * xi[2]]
    })
}

/// Largest integer wavenumber kept by the 2/3 rule.
pub fn dealias_cutoff(grid: &BoxGrid) -> i64 {
    // keep |k| < n/3
    let n = grid.n() as i64;
    (n - 1) / 3
}

/// Zeroes every mode with some `|k_a| > n/3` (2/3-rule truncation).
pub fn dealias(u: &SpectralField) -> SpectralField {
    let g = u.grid;
    let kc = dealias_cutoff(&g);
    u.map_modes(|i, v| {
        if g.wavevector(i).iter().all(|k| k.abs() <= kc) {
            v
        } else {
            [Complex64::new(0.0, 0.0); 3]
        }
    })
}

/// `M(u) = −(K(u)·∇)u + (u·∇)K(u)`, evaluated pseudospectrally with 2/3-rule
/// dealiasing of both the inputs and the product.
pub fn nonlinearity(u: &SpectralField) -> SpectralField {
    let g = u.grid;
    let ud = dealias(u);
    let x = biot_savart(&ud);
    let u_phys = ud.to_physical();
    let x_phys = x.to_physical();
    let du: [PhysicalField; 3] = std::array::from_fn(|j| partial_derivative(&ud, j).to_physical());
    let dx: [PhysicalField; 3] = std::array::from_fn(|j| partial_derivative(&x, j).to_physical());
    let mut out = PhysicalField::zeros(g);
    let mut magnitude = 0.0f64;
    for p in 0..g.len() {
        for c in 0..3 {
            let (mut acc, mut size) = (0.0, 0.0);
            for j in 0..3 {
                let (a, b) = (x_phys.comps[j][p] * du[j].comps[c][p], u_phys.comps[j][p] * dx[j].comps[c][p]);
                acc += b - a;
                size += a.abs() + b.abs();
            }
            out.comps[c][p] = acc;
            magnitude = magnitude.max(size);
        }
    }
    let m = dealias(&SpectralField::from_physical(&out));
    // Roundoff in the transform scales with the pointwise products, not with |M̂|.
    debug_assert!(m.hermitian_defect() <= 1e-12 * magnitude.max(m.max_abs()), "Hermitian symmetry lost in M");
    m
}

/// Cell-volume-weighted `(Σ |u(x)|^p ΔV)^{1/p}`; `p = ∞` is the max norm.
pub fn lp_norm(u: &PhysicalField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("L^p norm needs p >= 1, got {p}")));
    }
    let len = |i: usize| (u.comps[0][i].powi(2) + u.comps[1][i].powi(2) + u.comps[2][i].powi(2)).sqrt();
    let n = u.grid.len();
    if p.is_infinite() {
        return Ok((0..n).map(len).fold(0.0, f64::max));
    }
    let s: f64 = (0..n).map(|i| len(i).powf(p)).sum();
    Ok((s * u.grid.cell_volume()).powf(1.0 / p))
}

pub fn lp_norm_spectral(u: &SpectralField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("L^p norm needs p >= 1, got {p}")));
    }
    lp_norm(&u.to_physical(), p)
}
