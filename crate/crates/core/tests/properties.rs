use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vortex_core::gamma::{apply_gamma, build_gamma, eta_upper_bound, Direction, NoiseChannel, NoiseModel};
use vortex_core::harness::{smooth_datum, RunConfig};
use vortex_core::roughpath::{
    enhance, gubinelli_integral, sample_brownian, ControlledScalarPath, DrivingPath, FineTimeGrid, Flavor, Partition,
};
use vortex_core::spectral::{
    biot_savart, curl, divergence, heat_semigroup, lp_norm_spectral, nonlinearity, project_div_free, BoxGrid, FourierMultiplier,
};

fn grid() -> BoxGrid {
    BoxGrid::new(32.0, 8).unwrap()
}

fn lattice_path(steps: Vec<(i64, i64)>) -> DrivingPath {
    let mut lattice = vec![0i64, 0];
    for (a, b) in &steps {
        let n = lattice.len();
        lattice.push(lattice[n - 2] + a);
        lattice.push(lattice[n - 1] + b);
    }
    DrivingPath::from_lattice(FineTimeGrid::new(1.0, steps.len()).unwrap(), 2, 0, lattice).unwrap()
}

fn increments() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((-1_000_000i64..1_000_000, -1_000_000i64..1_000_000), 16)
}

fn noise(seed: u64) -> NoiseModel {
    use rand::Rng;
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = (0..2)
        .map(|_| NoiseChannel {
            kernel: FourierMultiplier::gaussian(g, rng.random_range(1.5..4.0), rng.random_range(0.05..0.3)).unwrap(),
            lambda: rng.random_range(-3.0..3.0),
        })
        .collect();
    NoiseModel::new(g, channels, false).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chen_holds_on_lattice_paths(steps in increments(), strat in any::<bool>(), a in 0usize..16, c in 1usize..16, b in 2usize..=16) {
        prop_assume!(a < c && c < b);
        let rp = enhance(lattice_path(steps), if strat { Flavor::Stratonovich } else { Flavor::Ito });
        prop_assert!(rp.chen_defect_nodes(a, c, b).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn stratonovich_symmetric_part_is_half_square(steps in increments(), a in 0usize..16, b in 1usize..=16) {
        prop_assume!(a < b);
        let rp = enhance(lattice_path(steps), Flavor::Stratonovich);
        let l = rp.path().lattice();
        let d = [(l[2 * b] - l[2 * a]) as i128, (l[2 * b + 1] - l[2 * a + 1]) as i128];
        let x = rp.level2_exact(a, b);
        for i in 0..2 {
            for k in 0..2 {
                prop_assert_eq!(x[2 * i + k] + x[2 * k + i], 2 * d[i] * d[k]);
            }
        }
    }

    #[test]
    fn gubinelli_is_partition_independent_on_exact_integrands(seed in 0u64..1000, keep in 0.01f64..0.9) {
        let rp = enhance(sample_brownian(seed, 2, FineTimeGrid::new(1.0, 256).unwrap()).unwrap(), Flavor::Ito);
        let one = ControlledScalarPath::from_fn(&rp, 32, 224, 1, |_| vec![1.0], |_| vec![0.0; 2]).unwrap();
        let beta = ControlledScalarPath::from_fn(&rp, 32, 224, 2, |j| rp.path().values_at(j), |_| vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for y in [&one, &beta] {
            let fine = gubinelli_integral(y, &rp, &Partition::dyadic(32, 224, 1).unwrap()).unwrap();
            let coarse = gubinelli_integral(y, &rp, &Partition::random(32, 224, keep, &mut rng)).unwrap();
            prop_assert_eq!(fine, coarse);
        }
    }

    #[test]
    fn curl_and_biot_savart_are_divergence_free(seed in 0u64..1000) {
        let u = smooth_datum(grid(), seed, 2, 1.0).unwrap();
        let scale = u.max_abs() * grid().n() as f64;
        for f in [curl(&u), biot_savart(&u)] {
            prop_assert!(divergence(&f).iter().all(|z| z.norm() <= 1e-12 * scale));
        }
    }

    #[test]
    fn curl_inverts_biot_savart(seed in 0u64..1000) {
        let u = smooth_datum(grid(), seed, 2, 1.0).unwrap();
        prop_assert!(curl(&biot_savart(&u)).sub(&u).max_abs() <= 1e-12 * u.max_abs());
    }

    #[test]
    fn heat_flow_contracts(seed in 0u64..1000, t in 0.0f64..5.0) {
        let u = smooth_datum(grid(), seed, 2, 1.0).unwrap();
        let v = heat_semigroup(&u, t).unwrap();
        prop_assert!(v.inner(&v) <= u.inner(&u) * (1.0 + 1e-12));
        prop_assert!(lp_norm_spectral(&v, 1.5).unwrap() <= lp_norm_spectral(&u, 1.5).unwrap() * (1.0 + 1e-8));
    }

    #[test]
    fn nonlinearity_is_quadratic(seed in 0u64..1000, lambda in -4.0f64..4.0) {
        let u = smooth_datum(grid(), seed, 2, 1.0).unwrap();
        let m = nonlinearity(&u).scale(lambda * lambda);
        prop_assert!(nonlinearity(&u.scale(lambda)).sub(&m).max_abs() <= 1e-12 * m.max_abs().max(1e-300));
    }

    #[test]
    fn gamma_forward_inverts(seed in 0u64..1000, b0 in -2.0f64..2.0, b1 in -2.0f64..2.0, t in 0.0f64..1.0) {
        let noise = noise(seed);
        let u = project_div_free(&smooth_datum(grid(), seed, 2, 1.0).unwrap());
        let op = build_gamma(&noise, &[b0, b1], t).unwrap();
        let back = apply_gamma(&op, &apply_gamma(&op, &u, Direction::Forward).unwrap(), Direction::Inverse).unwrap();
        prop_assert!(back.sub(&u).max_abs() <= 1e-12 * u.max_abs());
    }

    #[test]
    fn gamma_channels_commute(seed in 0u64..1000, b0 in -2.0f64..2.0, b1 in -2.0f64..2.0, t in 0.0f64..1.0) {
        let noise = noise(seed);
        let mut rev = noise.clone();
        rev.channels.reverse();
        let (x, y) = (build_gamma(&noise, &[b0, b1], t).unwrap(), build_gamma(&rev, &[b1, b0], t).unwrap());
        prop_assert!(x.forward.iter().zip(&y.forward).all(|(a, b)| (a - b).norm() <= 1e-12 * a.norm()));
    }

    #[test]
    fn scalar_gamma_is_exponential(l0 in -2.0f64..2.0, l1 in -2.0f64..2.0, b0 in -2.0f64..2.0, b1 in -2.0f64..2.0, t in 0.0f64..1.0) {
        let op = build_gamma(&NoiseModel::scalar(grid(), &[l0, l1]).unwrap(), &[b0, b1], t).unwrap();
        let e = (l0 * b0 + l1 * b1 - 0.5 * t * (l0 * l0 + l1 * l1)).exp();
        prop_assert!(op.forward.iter().all(|z| (z.re - e).abs() <= 1e-13 * e && z.im.abs() <= 1e-13 * e));
    }

    #[test]
    fn eta_bound_dominates_exact(seed in 0u64..1000, b0 in -2.0f64..2.0, b1 in -2.0f64..2.0, t in 0.0f64..1.0) {
        let e = eta_upper_bound(&noise(seed), &[b0, b1], t, 1.8, 1.0 / (2.0 / 1.8 - 1.0 / 3.0)).unwrap();
        prop_assert!(e.bound >= e.exact_l2);
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), steps_log in 12u32..18, alpha in 0.34f64..0.49) {
        let mut cfg = RunConfig::new(seed, "runs/x");
        cfg.roughpath.steps = 1 << steps_log;
        cfg.roughpath.alpha = alpha;
        cfg.solver.alpha = alpha;
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back.to_toml(), cfg.to_toml());
    }

    #[test]
    fn non_dyadic_step_counts_are_named(steps in 17usize..100_000) {
        prop_assume!(!steps.is_power_of_two());
        let mut cfg = RunConfig::new(1, "runs/x");
        cfg.roughpath.steps = steps;
        prop_assert!(cfg.diagnostics().iter().any(|d| d.contains("roughpath.steps")));
    }
}
