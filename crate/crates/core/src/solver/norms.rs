use super::SolutionTrajectory;
use crate::error::{Error, Result};
use crate::spectral::{lp_norm, partial_derivative, PhysicalField, SpectralField};
use rayon::prelude::*;

/// Time weights `(1 − 3/(2p), (3/2)(1 − 1/p))` of the `Z_p` norm.
pub fn zp_weights(p: f64) -> (f64, f64) {
    (1.0 - 1.5 / p, 1.5 * (1.0 - 1.0 / p))
}

fn node_value(t: f64, y: &SpectralField, p: f64) -> Result<f64> {
    let (a, b) = zp_weights(p);
    let base = t.powf(a) * lp_norm(&y.to_physical(), p)?;
    let mut worst = 0.0f64;
    for axis in 0..3 {
        worst = worst.max(t.powf(b) * lp_norm(&partial_derivative(y, axis).to_physical(), p)?);
    }
    Ok(base + worst)
}

/// `sup_{t_j > 0} max_i t^{1−3/(2p)}|y_t|_p + t^{(3/2)(1−1/p)}|∂_i y_t|_p` over the given nodes.
pub fn zp_norm_of(times: &[f64], y: &[SpectralField], p: f64) -> Result<f64> {
    let vals: Vec<f64> = times
        .par_iter()
        .zip(y.par_iter())
        .filter(|(t, _)| **t > 0.0)
        .map(|(&t, y)| node_value(t, y, p))
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

pub fn zp_distance(times: &[f64], a: &[SpectralField], b: &[SpectralField], p: f64) -> Result<f64> {
    let diff: Vec<SpectralField> = a.iter().zip(b).map(|(a, b)| a.sub(b)).collect();
    zp_norm_of(times, &diff, p)
}

pub fn zp_norm(traj: &SolutionTrajectory, p: f64) -> Result<f64> {
    zp_norm_of(&traj.mesh.times, &traj.y, p)
}

fn lp_diff(a: &PhysicalField, b: &PhysicalField, p: f64) -> Result<f64> {
    let mut d = a.clone();
    for c in 0..3 {
        for (x, y) in d.comps[c].iter_mut().zip(&b.comps[c]) {
            *x -= y;
        }
    }
    lp_norm(&d, p)
}

/// Weighted `ε`-Hölder seminorm over node pairs `u < v` in `[s, t]`:
/// `u^{2ε+1−3/(2p)}|δy_{uv}|_p/|v−u|^ε + u^{2ε+3/2−3/(2p)} Σ_j |δ(∂_j y)_{uv}|_p/|v−u|^ε`.
pub fn zp_eps_seminorm(traj: &SolutionTrajectory, p: f64, epsilon: f64, s: f64, t: f64) -> Result<f64> {
    let cap = 0.5 - 0.75 / p;
    if !(epsilon > 0.0 && epsilon < cap) {
        return Err(Error::Exponents(format!("ε = {epsilon} must lie in (0, {cap})")));
    }
    if !(s > 0.0) {
        return Err(Error::WindowTouchesZero(format!("[{s}, {t}]")));
    }
    let nodes = traj.mesh.window(s, t);
    if !(s < t) || nodes.len() < 2 {
        return Err(Error::DegenerateWindow(format!("[{s}, {t}] holds {} solver nodes", nodes.len())));
    }
    let phys: Vec<[PhysicalField; 4]> = nodes
        .par_iter()
        .map(|&j| {
            let y = &traj.y[j];
            [y.to_physical(), partial_derivative(y, 0).to_physical(), partial_derivative(y, 1).to_physical(), partial_derivative(y, 2).to_physical()]
        })
        .collect();
    let times: Vec<f64> = nodes.iter().map(|&j| traj.mesh.times[j]).collect();
    let a = 2.0 * epsilon + 1.0 - 1.5 / p;
    let b = 2.0 * epsilon + 1.5 - 1.5 / p;
    let rows: Vec<f64> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let mut worst = 0.0f64;
            for k in i + 1..nodes.len() {
                let (u, v) = (times[i], times[k]);
                let h = (v - u).powf(epsilon);
                let mut val = u.powf(a) * lp_diff(&phys[k][0], &phys[i][0], p)? / h;
                for d in 1..4 {
                    val += u.powf(b) * lp_diff(&phys[k][d], &phys[i][d], p)? / h;
                }
                worst = worst.max(val);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().fold(0.0, f64::max))
}
