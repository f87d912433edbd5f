mod common;

use palpate::trajectory::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bounds() -> PrimitiveBounds<f64> {
    PrimitiveBounds::new(0.0, 1.0, -3.0, 3.0).unwrap()
}

fn pairs(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..1.0f64, -3.0..3.0f64), 1..max)
}

#[test]
fn endpoints_match_rk4() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..25 {
        let m = rng.random_range(1..5);
        let pairs: Vec<(f64, f64)> = (0..m).map(|_| (rng.random_range(0.0..1.0), rng.random_range(-3.0..3.0))).collect();
        let q0 = Pose::new(rng.random(), rng.random(), rng.random_range(-3.0..3.0));
        let params = PrimitiveParams::new(pairs.clone(), 0.5, bounds()).unwrap();
        let end = *rollout(&q0, &params, 0.5).unwrap().end().unwrap();
        let (x, y, th) = common::rk4_dubins((q0.x, q0.y, q0.theta), &pairs, 0.5, 1e-4);
        assert!((end.x - x).abs() < 1e-6 && (end.y - y).abs() < 1e-6);
        assert!((end.theta - th).abs() < 1e-8);
    }
}

proptest! {
    #[test]
    fn rollout_is_se2_equivariant(
        p in pairs(5),
        angle in -3.2..3.2f64,
        tx in -2.0..2.0f64,
        ty in -2.0..2.0f64,
        x in -1.0..1.0f64,
        y in -1.0..1.0f64,
        th in -3.2..3.2f64,
    ) {
        let params = PrimitiveParams::new(p, 0.3, bounds()).unwrap();
        let q0 = Pose::new(x, y, th);
        let a = rollout(&q0, &params, 0.03).unwrap();
        let b = rollout(&q0.transformed(angle, tx, ty), &params, 0.03).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (qa, qb) in a.poses.iter().zip(&b.poses) {
            let t = qa.transformed(angle, tx, ty);
            prop_assert!((t.x - qb.x).abs() < 1e-9 && (t.y - qb.y).abs() < 1e-9);
            prop_assert!(t.heading_error(qb).abs() < 1e-9);
        }
    }

    #[test]
    fn small_turn_rate_is_continuous(v in 0.0..1.0f64, eps in 1e-12..1e-6f64, th in -3.2..3.2f64, s in 0.0..0.5f64) {
        let q = Pose::new(0.1, -0.2, th);
        let straight = propagate(&q, v, 0.0, s, 0.5);
        for w in [eps, -eps] {
            let bent = propagate(&q, v, w, s, 0.5);
            prop_assert!((straight.x - bent.x).abs() < 1e-6 && (straight.y - bent.y).abs() < 1e-6);
        }
    }

    #[test]
    fn speed_ball_bound(p in pairs(6), th in -3.2..3.2f64) {
        let params = PrimitiveParams::new(p, 0.25, bounds()).unwrap();
        let q0 = Pose::new(0.0, 0.0, th);
        let path = rollout(&q0, &params, 0.0125).unwrap();
        for (q, t) in path.poses.iter().zip(&path.times) {
            prop_assert!(q.position().coords.norm() <= bounds().v_max * t + 1e-12);
        }
        prop_assert!(path_length(&path) <= bounds().v_max * params.duration() + 1e-12);
    }

    #[test]
    fn clamp_is_idempotent_projection(z in prop::collection::vec(-10.0..10.0f64, 2..12)) {
        let z = if z.len() % 2 == 1 { z[..z.len() - 1].to_vec() } else { z };
        let p = PrimitiveParams::from_flat(&z, 0.2, bounds()).unwrap();
        prop_assert!(p.pairs.iter().all(|&(v, w)| bounds().contains(v, w)));
        prop_assert_eq!(p.clamp(), p);
    }
}
