use super::{RoughPath, LEVEL2_UNIT};
use crate::error::{Error, Result};

/// `sup |δX_{uv}| / |u − v|^γ` over all node pairs, Euclidean norm on values.
pub fn hoelder_norm(times: &[f64], values: &[Vec<f64>], gamma: f64) -> Result<f64> {
    if times.len() < 2 || times.len() != values.len() {
        return Err(Error::DegenerateWindow(format!(
            "need at least two nodes with matching values, got {} times / {} values",
            times.len(),
            values.len()
        )));
    }
    let mut best = 0.0f64;
    for a in 0..times.len() {
        for b in a + 1..times.len() {
            let d: f64 = values[a]
                .iter()
                .zip(&values[b])
                .map(|(x, y)| (y - x) * (y - x))
                .sum::<f64>()
                .sqrt();
            best = best.max(d / (times[b] - times[a]).abs().powf(gamma));
        }
    }
    Ok(best)
}

/// `sup |𝔹_{uv}| / |u − v|^{2γ}` over node pairs in `[a, b]`, Frobenius norm.
pub fn hoelder_norm_level2(rp: &RoughPath, a: usize, b: usize, gamma: f64) -> Result<f64> {
    if b <= a || b > rp.grid().steps() {
        return Err(Error::DegenerateWindow(format!("node window [{a}, {b}]")));
    }
    let n = rp.channels();
    let grid = rp.grid();
    let mut best = 0.0f64;
    for u in a..b {
        if !rp.overrides.is_empty() {
            for v in u + 1..=b {
                let t = rp.level2(u, v);
                let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
                best = best.max(norm / (grid.time(v) - grid.time(u)).powf(2.0 * gamma));
            }
            continue;
        }
        let mut acc = vec![0i128; n * n];
        for j in u..b {
            for i in 0..n {
                let lead = (rp.path.lattice_at(j, i) - rp.path.lattice_at(u, i)) as i128;
                for k in 0..n {
                    let dk = (rp.path.lattice_at(j + 1, k) - rp.path.lattice_at(j, k)) as i128;
                    acc[i * n + k] += rp.interval_tensors[(j * n + i) * n + k] + 2 * lead * dk;
                }
            }
            let norm = acc
                .iter()
                .map(|&x| {
                    let f = x as f64 * LEVEL2_UNIT;
                    f * f
                })
                .sum::<f64>()
                .sqrt();
            best = best.max(norm / (grid.time(j + 1) - grid.time(u)).powf(2.0 * gamma));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roughpath::{enhance, sample_brownian, Flavor, FineTimeGrid};
    use proptest::prelude::*;

    fn times(n: usize, t0: f64, dt: f64) -> Vec<f64> {
        (0..n).map(|j| t0 + j as f64 * dt).collect()
    }

    #[test]
    fn constant_path_is_zero() {
        let t = times(10, 0.0, 0.1);
        let v = vec![vec![3.0, -1.0]; 10];
        assert_eq!(hoelder_norm(&t, &v, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn linear_path_attains_full_window() {
        let t = times(65, 0.25, 1.0 / 128.0);
        let c = 2.5;
        let v: Vec<Vec<f64>> = t.iter().map(|x| vec![c * x]).collect();
        let got = hoelder_norm(&t, &v, 0.5).unwrap();
        let expect = c * (t[64] - t[0]).sqrt();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn single_node_rejected() {
        assert!(matches!(hoelder_norm(&[0.0], &[vec![1.0]], 0.4), Err(Error::DegenerateWindow(_))));
    }

    #[test]
    fn level2_matches_per_pair_composition() {
        let rp = enhance(sample_brownian(8, 2, FineTimeGrid::new(1.0, 64).unwrap()).unwrap(), Flavor::Ito);
        let mut brute = 0.0f64;
        for u in 0..64 {
            for v in u + 1..=64 {
                let n = rp.level2(u, v).iter().map(|x| x * x).sum::<f64>().sqrt();
                brute = brute.max(n / (rp.grid().time(v) - rp.grid().time(u)).powf(0.8));
            }
        }
        assert_eq!(hoelder_norm_level2(&rp, 0, 64, 0.4).unwrap(), brute);
    }

    #[test]
    fn brownian_norm_matches_brute_force_at_256() {
        let rp = enhance(sample_brownian(2, 2, FineTimeGrid::new(1.0, 256).unwrap()).unwrap(), Flavor::Ito);
        let g = rp.grid();
        let mut brute = 0.0f64;
        for u in 0..=256usize {
            for v in 0..=256usize {
                if u == v {
                    continue;
                }
                let d = rp.path().increment(u.min(v), u.max(v));
                let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
                brute = brute.max(n / (g.time(u) - g.time(v)).abs().powf(0.4));
            }
        }
        let got = rp.beta_hoelder(0, 256).unwrap();
        assert!((got - brute).abs() <= 1e-14 * brute);
        assert!(got.is_finite());
        let big = enhance(sample_brownian(2, 2, FineTimeGrid::new(1.0, 4096).unwrap()).unwrap(), Flavor::Ito);
        assert!(big.beta_hoelder(0, 4096).unwrap().is_finite());
        assert!(big.level2_hoelder(0, 4096).unwrap().is_finite());
    }

    proptest! {
        #[test]
        fn monotone_under_inclusion_and_translation_invariant(
            vals in prop::collection::vec(-2.0f64..2.0, 24),
            cut in 2usize..12,
            shift in 0.0f64..5.0,
        ) {
            let t = times(24, 0.0, 0.05);
            let v: Vec<Vec<f64>> = vals.iter().map(|x| vec![*x]).collect();
            let full = hoelder_norm(&t, &v, 0.4).unwrap();
            let part = hoelder_norm(&t[..cut], &v[..cut], 0.4).unwrap();
            prop_assert!(part <= full);
            let ts: Vec<f64> = t.iter().map(|x| x + shift).collect();
            let moved = hoelder_norm(&ts, &v, 0.4).unwrap();
            prop_assert!((moved - full).abs() <= 1e-9 * full.max(1.0));
        }
    }
}
