use nalgebra::DVector;
use palpate::cem::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rosenbrock(z: &[f64]) -> f64 {
    z.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
}

fn config(seed: u64, components: usize) -> CemConfig<f64> {
    CemConfig { n_samples: 60, max_iters: 12, seed, components, ..CemConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn incumbent_never_worsens(seed in 0u64..10_000, k in 1usize..3) {
        let g0 = GmmParams::diagonal(DVector::zeros(3), &[1.0; 3]).unwrap();
        let out = optimize(rosenbrock, g0, &config(seed, k)).unwrap();
        for w in out.trace.windows(2) {
            prop_assert!(w[1].best_cost <= w[0].best_cost);
        }
        for r in &out.trace {
            prop_assert!(out.best_cost <= r.iteration_best);
        }
        prop_assert_eq!(rosenbrock(out.best.as_slice()), out.best_cost);
    }

    #[test]
    fn identical_seed_identical_trace(seed in 0u64..10_000) {
        let g0 = GmmParams::diagonal(DVector::from_vec(vec![0.5, -0.5]), &[0.5, 2.0]).unwrap();
        let a = optimize(rosenbrock, g0.clone(), &config(seed, 2)).unwrap();
        let b = optimize(rosenbrock, g0, &config(seed, 2)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn update_keeps_weights_and_floor(seed in 0u64..10_000, k in 1usize..4, floor in 1e-8..1e-2f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GmmParams::diagonal(DVector::zeros(4), &[1.0; 4]).unwrap();
        let samples = sample(&g, 80, &mut rng);
        let costs: Vec<f64> = samples.iter().map(|z| rosenbrock(z.as_slice())).collect();
        let cfg = CemConfig { min_covariance_floor: floor, elite_frac: 0.25, ..CemConfig::default() };
        let fit = elite_update(&samples, &costs, &cfg, k, &mut rng).unwrap();
        let wsum: f64 = fit.components().iter().map(|c| c.weight).sum();
        prop_assert!((wsum - 1.0).abs() < 1e-12);
        prop_assert!(fit.min_eigenvalue() >= floor * (1.0 - 1e-9));
    }
}
