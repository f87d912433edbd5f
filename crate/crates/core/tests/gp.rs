mod common;

use nalgebra::{Matrix2, Point2};
use palpate::gp::{GpModel, Kernel, TargetScaling};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point() -> impl Strategy<Value = Point2<f64>> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

fn kernel() -> impl Strategy<Value = Kernel<f64>> {
    (0.05..2.0f64, 0.1..5.0f64, 0.0..0.5f64).prop_map(|(l, s, n)| Kernel::new(l, s, n).unwrap())
}

fn dataset(max: usize) -> impl Strategy<Value = (Vec<Point2<f64>>, Vec<f64>)> {
    prop::collection::vec((point(), -3.0..3.0f64), 1..max).prop_map(|v| v.into_iter().unzip())
}

#[test]
fn matches_dense_inverse_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let l = rng.random_range(0.1..0.5);
        let sn2 = rng.random_range(0.01..0.1);
        let xs: Vec<Point2<f64>> = (0..50).map(|_| Point2::new(rng.random(), rng.random())).collect();
        let ys: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..4.0)).collect();
        let qs: Vec<Point2<f64>> = (0..20).map(|_| Point2::new(rng.random(), rng.random())).collect();
        let k = Kernel::new(l, 1.0, sn2).unwrap();

        let raw = GpModel::fit(k, &xs, &ys, None, TargetScaling::None).unwrap();
        for (p, (m, v)) in raw.predict(&qs).unwrap().iter().zip(common::dense_posterior(l, 1.0, sn2, &xs, &ys, &qs)) {
            assert!((p.mean - m).abs() < 1e-8 && (p.variance - v).abs() < 1e-8);
        }
        let std = GpModel::fit(k, &xs, &ys, None, TargetScaling::Standardize).unwrap();
        let oracle = common::dense_posterior_standardized(l, 1.0, sn2, &xs, &ys, &qs);
        for (p, (m, v)) in std.predict(&qs).unwrap().iter().zip(oracle) {
            assert!((p.mean - m).abs() < 1e-8 && (p.variance - v).abs() < 1e-8);
        }
    }
}

#[test]
fn duplicate_noiseless_points_are_jittered() {
    let k = Kernel::new(0.3, 1.0, 0.0).unwrap();
    let xs = vec![Point2::new(0.5f64, 0.5); 3];
    let m = GpModel::fit(k, &xs, &[1.0, 1.0, 1.0], None, TargetScaling::None).unwrap();
    assert!(m.jitter() > 0.0 && m.jitter() <= 1e-4);
    let p = m.predict_one(&Point2::new(0.5, 0.5)).unwrap();
    assert!((p.mean - 1.0).abs() < 1e-3 && p.variance >= 0.0);
}

#[test]
fn f32_model_tracks_f64() {
    let xs64: Vec<Point2<f64>> = (0..10).map(|i| Point2::new(i as f64 / 10.0, (i * 3 % 10) as f64 / 10.0)).collect();
    let ys64: Vec<f64> = xs64.iter().map(|p| (3.0 * p.x).sin() + p.y).collect();
    let xs32: Vec<Point2<f32>> = xs64.iter().map(|p| Point2::new(p.x as f32, p.y as f32)).collect();
    let ys32: Vec<f32> = ys64.iter().map(|&y| y as f32).collect();
    let m64 = GpModel::fit(Kernel::new(0.3, 1.0, 0.05).unwrap(), &xs64, &ys64, None, TargetScaling::Standardize).unwrap();
    let m32 = GpModel::fit(Kernel::new(0.3f32, 1.0, 0.05).unwrap(), &xs32, &ys32, None, TargetScaling::Standardize).unwrap();
    let a = m64.predict_one(&Point2::new(0.45, 0.55)).unwrap();
    let b = m32.predict_one(&Point2::new(0.45, 0.55)).unwrap();
    assert!((a.mean - b.mean as f64).abs() < 1e-3);
    assert!((a.variance - b.variance as f64).abs() < 1e-3);
}

proptest! {
    #[test]
    fn kernel_is_symmetric_and_bounded(k in kernel(), a in point(), b in point()) {
        prop_assert_eq!(k.eval(&a, &b), k.eval(&b, &a));
        prop_assert!(k.eval(&a, &b) <= k.signal_variance());
        prop_assert_eq!(k.eval(&a, &a), k.signal_variance());
    }

    #[test]
    fn corrected_kernel_reduces_and_is_symmetric(k in kernel(), a in point(), b in point(), s in 0.0..0.3f64) {
        let z = Matrix2::zeros();
        prop_assert!((k.eval_corrected(&a, &b, &z, &z).unwrap() - k.eval(&a, &b)).abs() < 1e-15);
        let s1 = Matrix2::new(s, 0.0, 0.0, s / 2.0);
        let s2 = Matrix2::new(s / 3.0, s / 10.0, s / 10.0, s);
        let ab = k.eval_corrected(&a, &b, &s1, &s2).unwrap();
        prop_assert!((ab - k.eval_corrected(&b, &a, &s2, &s1).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= k.signal_variance() + 1e-12);
    }

    #[test]
    fn posterior_variance_below_prior((xs, ys) in dataset(15), k in kernel(), q in point()) {
        let m = GpModel::fit(k, &xs, &ys, None, TargetScaling::None).unwrap();
        let p = m.predict_one(&q).unwrap();
        prop_assert!(p.variance >= 0.0);
        prop_assert!(p.variance <= k.signal_variance() * (1.0 + 1e-9));
    }

    #[test]
    fn adding_data_never_increases_variance(
        (xs, ys) in dataset(12),
        extra in point(),
        y in -3.0..3.0f64,
        l in 0.1..1.0f64,
        q in point(),
    ) {
        let k = Kernel::new(l, 1.0, 0.05).unwrap();
        let m = GpModel::fit(k, &xs, &ys, None, TargetScaling::None).unwrap();
        let m2 = m.with_observation(extra, y, None).unwrap();
        prop_assert_eq!(m2.len(), m.len() + 1);
        let v1 = m.predict_one(&q).unwrap().variance;
        let v2 = m2.predict_one(&q).unwrap().variance;
        prop_assert!(v2 <= v1 + 1e-9);
    }

    #[test]
    fn refit_reproduces_training_set((xs, ys) in dataset(10), k in kernel()) {
        let m = GpModel::fit(k, &xs, &ys, None, TargetScaling::Standardize).unwrap();
        prop_assert_eq!(m.inputs(), &xs[..]);
        prop_assert_eq!(m.targets(), &ys[..]);
    }
}
