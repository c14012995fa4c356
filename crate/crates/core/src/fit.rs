//! Log-log least-squares fits used by every refinement diagnostic.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted exponent; `f64::INFINITY` when every difference was exactly zero.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub residual: f64,
    pub points: usize,
}

impl RateFit {
    pub fn exact_sentinel() -> Self {
        Self { slope: f64::INFINITY, intercept: f64::NAN, residual: 0.0, points: 0 }
    }

    pub fn is_sentinel(&self) -> bool {
        self.slope == f64::INFINITY
    }
}

/// Fits `log y = slope * log x + intercept` over the points with `y > 0`.
/// Returns the sentinel when fewer than two positive points remain.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> RateFit {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return RateFit::exact_sentinel();
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    RateFit { slope, intercept, residual: (ss / n).sqrt(), points: pts.len() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let xs = [1.0, 0.5, 0.25, 0.125];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        let f = loglog_fit(&xs, &ys);
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn zeros_give_sentinel() {
        assert!(loglog_fit(&[1.0, 0.5], &[0.0, 0.0]).is_sentinel());
    }
}
