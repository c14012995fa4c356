use vortex_core::roughpath::{sample_brownian, FineTimeGrid};

#[test]
fn sampled_paths_start_at_zero_with_unit_variance() {
    let grid = FineTimeGrid::new(1.0, 4096).unwrap();
    let seeds = 1000;
    let mut ends = Vec::with_capacity(seeds);
    for seed in 0..seeds as u64 {
        let path = sample_brownian(seed, 2, grid).unwrap();
        assert_eq!(path.values_at(0), vec![0.0, 0.0]);
        ends.push(path.value(4096, 0));
    }
    let n = seeds as f64;
    let mean = ends.iter().sum::<f64>() / n;
    let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() <= 3.0 / n.sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() <= 3.0 * (2.0 / (n - 1.0)).sqrt(), "variance {var}");
}

#[test]
fn quadratic_variation_tracks_time() {
    let grid = FineTimeGrid::new(1.0, 4096).unwrap();
    let path = sample_brownian(42, 2, grid).unwrap();
    for c in 0..2 {
        let qv: f64 = (0..4096).map(|j| (path.value(j + 1, c) - path.value(j, c)).powi(2)).sum();
        assert!((qv - 1.0).abs() <= 3.0 * (2.0f64 / 4096.0).sqrt(), "channel {c} QV {qv}");
    }
}

#[test]
fn channels_are_uncorrelated() {
    let grid = FineTimeGrid::new(1.0, 4096).unwrap();
    let path = sample_brownian(42, 2, grid).unwrap();
    let cross: f64 = (0..4096)
        .map(|j| (path.value(j + 1, 0) - path.value(j, 0)) * (path.value(j + 1, 1) - path.value(j, 1)))
        .sum();
    assert!(cross.abs() <= 3.0 / 4096f64.sqrt(), "cross covariation {cross}");
}
