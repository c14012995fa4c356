use crate::error::{Error, Result};
use crate::roughpath::{Flavor, RoughPath, LEVEL2_UNIT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eq22Window {
    pub start: usize,
    pub end: usize,
    /// `𝔹^{ii} + ½(v−u) − 𝔹^{ii}_str` per channel.
    pub diagonal_defect: Vec<f64>,
    /// `|QV^{ii} − (v−u)|` per channel.
    pub qv_gap: Vec<f64>,
    /// `5 √(2(v−u)²/J_window)`.
    pub tolerance: f64,
    /// Largest `|QV^{ik}|`, `i ≠ k`, against `5 √((v−u)²/J_window)`.
    pub off_diagonal_qv: f64,
    /// `𝔹_str − 𝔹 = ½ QV` holds exactly in every entry.
    pub exact_half_covariation: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoStratReport {
    /// `max |½(𝔹^{ik}_str + 𝔹^{ki}_str) − ½δβ^iδβ^k|` over every grid pair.
    pub eq24_max: f64,
    pub pairs_checked: u64,
    pub windows: Vec<Eq22Window>,
    pub pass: bool,
}

/// `count` windows of at least `min_len` steps with uniformly drawn endpoints.
pub fn random_windows(steps: usize, count: usize, min_len: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let a = rng.random_range(0..steps);
            let b = rng.random_range(a + 1..=steps);
            if b - a >= min_len {
                break (a, b);
            }
        })
        .collect()
}

fn int_level2(rp: &RoughPath, a: usize, b: usize) -> Vec<i128> {
    rp.level2_exact(a, b)
}

pub fn ito_strat_identities(ito: &RoughPath, strat: &RoughPath, windows: &[(usize, usize)]) -> Result<ItoStratReport> {
    if ito.flavor() != Flavor::Ito || strat.flavor() != Flavor::Stratonovich {
        return Err(Error::FlavorMismatch(format!("expected (ito, stratonovich), got ({}, {})", ito.flavor(), strat.flavor())));
    }
    if ito.path() != strat.path() {
        return Err(Error::FlavorMismatch("the two enhancements come from different driving paths".into()));
    }
    let n = strat.channels();
    let steps = strat.grid().steps();
    let lat = strat.path().lattice();
    let tensors = strat.interval_tensors();
    // Incremental Chen composition from every left endpoint, exact in i128.
    let eq24: i128 = (0..steps)
        .into_par_iter()
        .map(|a| {
            let mut acc = vec![0i128; n * n];
            let mut worst = 0i128;
            for j in a..steps {
                for i in 0..n {
                    let lead = (lat[j * n + i] - lat[a * n + i]) as i128;
                    for k in 0..n {
                        let dk = (lat[(j + 1) * n + k] - lat[j * n + k]) as i128;
                        acc[i * n + k] += tensors[(j * n + i) * n + k] + 2 * lead * dk;
                    }
                }
                for i in 0..n {
                    let di = (lat[(j + 1) * n + i] - lat[a * n + i]) as i128;
                    for k in i..n {
                        let dk = (lat[(j + 1) * n + k] - lat[a * n + k]) as i128;
                        worst = worst.max((acc[i * n + k] + acc[k * n + i] - 2 * di * dk).abs());
                    }
                }
            }
            worst
        })
        .reduce(|| 0, i128::max);
    let g = strat.grid();
    let mut out = Vec::new();
    for &(a, b) in windows {
        if !(a < b && b <= steps) {
            return Err(Error::DegenerateWindow(format!("[{a}, {b}]")));
        }
        let (bi, bs) = (int_level2(ito, a, b), int_level2(strat, a, b));
        let qv = strat.quadratic_covariation(a, b);
        let len = g.time(b) - g.time(a);
        let jw = (b - a) as f64;
        let tolerance = 5.0 * (2.0 * len * len / jw).sqrt();
        let off_tol = 5.0 * (len * len / jw).sqrt();
        let mut exact = true;
        let (mut diagonal_defect, mut qv_gap, mut off) = (Vec::new(), Vec::new(), 0.0f64);
        for i in 0..n {
            for k in 0..n {
                // ½ Σ δβ^iδβ^k in level-2 units is the integer covariation itself.
                let half_qv: i128 = (a..b)
                    .map(|j| ((lat[(j + 1) * n + i] - lat[j * n + i]) as i128) * ((lat[(j + 1) * n + k] - lat[j * n + k]) as i128))
                    .sum();
                exact &= bs[i * n + k] - bi[i * n + k] == half_qv;
                if i != k {
                    off = off.max(qv[i * n + k].abs());
                }
            }
            diagonal_defect.push(bi[i * n + i] as f64 * LEVEL2_UNIT + 0.5 * len - bs[i * n + i] as f64 * LEVEL2_UNIT);
            qv_gap.push((qv[i * n + i] - len).abs());
        }
        let pass = exact && qv_gap.iter().all(|&q| q < tolerance) && off < off_tol;
        out.push(Eq22Window { start: a, end: b, diagonal_defect, qv_gap, tolerance, off_diagonal_qv: off, exact_half_covariation: exact, pass });
    }
    let eq24_max = eq24 as f64 * LEVEL2_UNIT * 0.5;
    let pass = eq24 == 0 && out.iter().all(|w| w.pass);
    Ok(ItoStratReport { eq24_max, pairs_checked: (steps * (steps + 1) / 2) as u64, windows: out, pass })
}
