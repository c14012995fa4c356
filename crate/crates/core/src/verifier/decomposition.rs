use super::{ModeData, TransformedPath, Window};
use crate::error::{Error, Result};
use crate::gamma::NoiseModel;
use crate::roughpath::{RoughPath, LEVEL2_UNIT};
use crate::solver::SolutionTrajectory;
use crate::spectral::{lp_norm, PhysicalField, SpectralField};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    /// `⟨y_t − y_s, φ⟩` from the transformed path.
    pub direct: f64,
    /// `Σ (J₁ + J₂ + J₃)` over the fine intervals, each term expanded to second order in `δβ`.
    pub reconstructed: f64,
    /// `Σ (v−u)(⟨y_u,Δφ⟩ + ⟨F_u,φ⟩)`: the deterministic weak form.
    pub weak_form: f64,
    /// `|direct − reconstructed|`.
    pub residual: f64,
    /// `|reconstructed − weak_form|`: what is left of the Itô/Stratonovich cross terms.
    pub cross_term: f64,
}

/// Rebuilds `⟨y_t − y_s,φ⟩ = Σ⟨Γ_v⁻¹U_v − Γ_u⁻¹U_u, φ⟩` by splitting each increment into
/// `J₁ = ⟨δU, Γ_u⁻¹φ⟩`, `J₂ = ⟨U_u, δΓ⁻¹φ⟩`, `J₃ = ⟨δU, δΓ⁻¹φ⟩`, with `δU` from the rough
/// weak form and `δΓ⁻¹` from its Taylor expansion.
pub fn j_decomposition_check(
    source: &dyn TransformedPath,
    noise: &NoiseModel,
    rp: &RoughPath,
    phi: &SpectralField,
    window: Window,
) -> Result<DecompositionCheck> {
    let md = ModeData::new(noise, phi)?;
    let g = rp.grid();
    let n = rp.channels();
    let one = |_| Complex64::new(1.0, 0.0);
    let parts: Vec<(f64, f64)> = (window.start..window.end)
        .into_par_iter()
        .map(|u| {
            let v = u + 1;
            let (tu, h) = (g.time(u), g.time(v) - g.time(u));
            let d = rp.path().increment(u, v);
            let l2: Vec<f64> = rp.level2_exact(u, v).into_iter().map(|x| x as f64 * LEVEL2_UNIT).collect();
            let vals = source.modes_at(tu, &md.modes);
            let y: Vec<_> = vals.iter().map(|(y, _)| *y).collect();
            let f: Vec<_> = vals.iter().map(|(_, f)| *f).collect();
            let bracket = |m: usize| {
                let b = &md.symbols[m];
                let lin: Complex64 = b.iter().zip(&d).map(|(b, d)| b * d).sum();
                let quad: Complex64 = b.iter().map(|b| b * b).sum();
                let mut area = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    for k in 0..n {
                        area += b[i] * b[k] * l2[i * n + k];
                    }
                }
                let j1 = Complex64::new(-md.xi_sq[m] * h, 0.0) + lin + area;
                let j2 = -lin + quad * (0.5 * h) + lin * lin * 0.5;
                let j3 = -lin * lin;
                j1 + j2 + j3
            };
            let rec = md.pair(&y, bracket) + h * md.pair(&f, one);
            let weak = h * (md.pair(&y, |m| Complex64::new(-md.xi_sq[m], 0.0)) + md.pair(&f, one));
            (rec, weak)
        })
        .collect();
    let reconstructed: f64 = parts.iter().map(|p| p.0).sum();
    let weak_form: f64 = parts.iter().map(|p| p.1).sum();
    let ends = [window.start, window.end].map(|j| {
        let y: Vec<_> = source.modes_at(g.time(j), &md.modes).into_iter().map(|(y, _)| y).collect();
        md.pair(&y, one)
    });
    let direct = ends[1] - ends[0];
    Ok(DecompositionCheck {
        direct,
        reconstructed,
        weak_form,
        residual: (direct - reconstructed).abs(),
        cross_term: (reconstructed - weak_form).abs(),
    })
}

/// `sup_{u<v} |f_v − f_u|_q / |v−u|^ε` over the given samples.
pub fn lq_hoelder_quotient(times: &[f64], fields: &[SpectralField], q: f64, epsilon: f64) -> Result<f64> {
    if times.len() != fields.len() || times.len() < 2 {
        return Err(Error::DegenerateWindow(format!("{} samples", times.len())));
    }
    let phys: Vec<PhysicalField> = fields.par_iter().map(SpectralField::to_physical).collect();
    let rows: Vec<f64> = (0..phys.len())
        .into_par_iter()
        .map(|a| {
            let mut worst = 0.0f64;
            for b in a + 1..phys.len() {
                let mut d = phys[b].clone();
                for c in 0..3 {
                    for (x, y) in d.comps[c].iter_mut().zip(&phys[a].comps[c]) {
                        *x -= y;
                    }
                }
                worst = worst.max(lp_norm(&d, q)? / (times[b] - times[a]).powf(epsilon));
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().fold(0.0, f64::max))
}

/// `ε`-Hölder quotient in `L^q` of the cached Duhamel integrand over solver nodes in `[s, t]`.
pub fn integrand_continuity_check(traj: &SolutionTrajectory, s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::WindowTouchesZero(format!("[{s}, {t}]")));
    }
    let nodes = traj.mesh.window(s, t);
    let times: Vec<f64> = nodes.iter().map(|&j| traj.mesh.times[j]).collect();
    let fields: Vec<SpectralField> = nodes.iter().map(|&j| traj.integrand[j].clone()).collect();
    lq_hoelder_quotient(&times, &fields, traj.config.q, traj.config.epsilon)
}

/// Largest jump of `t ↦ ⟨y_t, φ⟩` between adjacent nodes of `[0, T]` on the rough-path grid.
pub fn observable_continuity(source: &dyn TransformedPath, noise: &NoiseModel, rp: &RoughPath, phi: &SpectralField) -> Result<f64> {
    let md = ModeData::new(noise, phi)?;
    let g = rp.grid();
    let vals: Vec<f64> = (0..g.nodes())
        .into_par_iter()
        .map(|j| {
            let y: Vec<_> = source.modes_at(g.time(j), &md.modes).into_iter().map(|(y, _)| y).collect();
            md.pair(&y, |_| Complex64::new(1.0, 0.0))
        })
        .collect();
    Ok(vals.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{picard_solve, tests as st, IdentityGamma, Nonlinearity, SolveOptions};
    use crate::spectral::heat_semigroup;
    use crate::verifier::tests::{phi, rough, single_mode};
    use crate::verifier::HeatFlow;

    #[test]
    fn zero_integrand_is_continuous() {
        let g = st::grid();
        let opts = SolveOptions { nonlinearity: Nonlinearity::Zero, ..Default::default() };
        let traj = picard_solve(&st::cfg(16), &single_mode(g), &IdentityGamma(g), None, opts).unwrap();
        assert_eq!(integrand_continuity_check(&traj, 0.25, 0.75).unwrap(), 0.0);
        assert!(integrand_continuity_check(&traj, 0.0, 0.75).is_err());
    }

    #[test]
    fn single_mode_hoelder_constant() {
        let g = st::grid();
        let u0 = single_mode(g);
        let c = g.xi_sq(g.flat([1, 0, 0]));
        let (q, eps) = (1.2857142857142858, 0.05);
        let mesh = crate::solver::SolverMesh::graded(1.0, 64).unwrap();
        let nodes = mesh.window(0.25, 0.75);
        let times: Vec<f64> = nodes.iter().map(|&j| mesh.times[j]).collect();
        let fields: Vec<SpectralField> = times.iter().map(|&t| heat_semigroup(&u0, t).unwrap()).collect();
        let got = lq_hoelder_quotient(&times, &fields, q, eps).unwrap();
        let u0_q = lp_norm(&u0.to_physical(), q).unwrap();
        // sup over 1/4 <= u < v <= 3/4 of (e^{−cu} − e^{−cv}) / (v−u)^ε.
        let mut analytic = 0.0f64;
        for a in 0..=200 {
            for b in a + 1..=200 {
                let (u, v) = (0.25 + a as f64 / 400.0, 0.25 + b as f64 / 400.0);
                analytic = analytic.max(((-c * u).exp() - (-c * v).exp()) / (v - u).powf(eps));
            }
        }
        let analytic = analytic * u0_q;
        assert!(((got - analytic) / analytic).abs() < 0.1, "{got} vs {analytic}");
    }

    #[test]
    fn decomposition_reproduces_weak_form() {
        let g = st::grid();
        let noise = st::noise(g);
        let src = HeatFlow { u0: st::smooth_field(g, 2), horizon: 1.0 };
        let p = phi(g);
        let mut residuals = Vec::new();
        let rp = rough(7, 4096);
        for factor in [4, 2, 1] {
            let coarse = rp.coarsen(factor).unwrap();
            let w = Window::central(coarse.grid()).unwrap();
            let c = j_decomposition_check(&src, &noise, &coarse, &p, w).unwrap();
            assert!(c.residual.is_finite() && c.cross_term.is_finite());
            residuals.push(c.residual);
        }
        assert!(residuals[2] < residuals[0], "{residuals:?}");
    }

    #[test]
    fn continuity_jump_shrinks() {
        let g = st::grid();
        let src = HeatFlow { u0: st::smooth_field(g, 2), horizon: 1.0 };
        let rp = rough(7, 4096);
        let jumps: Vec<f64> = [4, 1]
            .iter()
            .map(|&f| observable_continuity(&src, &st::noise(g), &rp.coarsen(f).unwrap(), &phi(g)).unwrap())
            .collect();
        assert!(jumps[1] < jumps[0] && jumps[1] > 0.0, "{jumps:?}");
    }
}
