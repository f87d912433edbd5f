//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Point2};
use statrs::distribution::{ContinuousCDF, Normal};

pub fn se(l: f64, sf2: f64, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    sf2 * (-(a - b).norm_squared() / (2.0 * l * l)).exp()
}

/// Posterior (mean, latent variance) by explicit inversion of the Gram matrix.
pub fn dense_posterior(
    l: f64,
    sf2: f64,
    sn2: f64,
    xs: &[Point2<f64>],
    ys: &[f64],
    queries: &[Point2<f64>],
) -> Vec<(f64, f64)> {
    let n = xs.len();
    if n == 0 {
        return queries.iter().map(|_| (0.0, sf2)).collect();
    }
    let k = DMatrix::from_fn(n, n, |i, j| se(l, sf2, &xs[i], &xs[j]) + if i == j { sn2 } else { 0.0 });
    let kinv = k.try_inverse().expect("invertible Gram matrix");
    let y = DVector::from_column_slice(ys);
    queries
        .iter()
        .map(|q| {
            let ks = DVector::from_iterator(n, xs.iter().map(|x| se(l, sf2, q, x)));
            let mean = ks.dot(&(&kinv * &y));
            let var = sf2 - ks.dot(&(&kinv * &ks));
            (mean, var)
        })
        .collect()
}

/// Same, with targets standardized by their mean and population sd.
pub fn dense_posterior_standardized(
    l: f64,
    sf2: f64,
    sn2: f64,
    xs: &[Point2<f64>],
    ys: &[f64],
    queries: &[Point2<f64>],
) -> Vec<(f64, f64)> {
    let n = ys.len() as f64;
    let m = ys.iter().sum::<f64>() / n;
    let sd = (ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / n).sqrt();
    let z: Vec<f64> = ys.iter().map(|y| (y - m) / sd).collect();
    dense_posterior(l, sf2, sn2, xs, &z, queries)
        .into_iter()
        .map(|(mu, v)| (m + sd * mu, sd * sd * v))
        .collect()
}

/// Joint latent posterior over `queries` by explicit inversion.
pub fn dense_joint(
    l: f64,
    sf2: f64,
    sn2: f64,
    xs: &[Point2<f64>],
    ys: &[f64],
    queries: &[Point2<f64>],
) -> (DVector<f64>, DMatrix<f64>) {
    let n = xs.len();
    let m = queries.len();
    let kqq = DMatrix::from_fn(m, m, |i, j| se(l, sf2, &queries[i], &queries[j]));
    if n == 0 {
        return (DVector::zeros(m), kqq);
    }
    let k = DMatrix::from_fn(n, n, |i, j| se(l, sf2, &xs[i], &xs[j]) + if i == j { sn2 } else { 0.0 });
    let kinv = k.try_inverse().expect("invertible Gram matrix");
    let kqx = DMatrix::from_fn(m, n, |i, j| se(l, sf2, &queries[i], &xs[j]));
    let mean = &kqx * (&kinv * DVector::from_column_slice(ys));
    let cov = kqq - &kqx * &kinv * kqx.transpose();
    (mean, cov)
}

/// Expected number of claimed regions after observing `y` at each candidate,
/// averaging over `q` equally spaced quantiles of the predictive `y` and
/// refitting the GP each time. Regions already claimed count as 1.
#[allow(clippy::too_many_arguments)]
pub fn aas_exhaustive(
    l: f64,
    sf2: f64,
    sn2: f64,
    xs: &[Point2<f64>],
    ys: &[f64],
    centers: &[Point2<f64>],
    regions: &[Vec<usize>],
    tau: f64,
    theta: f64,
    q: usize,
) -> Vec<f64> {
    let std_normal = Normal::standard();
    let claimed = |xs: &[Point2<f64>], ys: &[f64], cells: &[usize]| {
        let pts: Vec<Point2<f64>> = cells.iter().map(|&c| centers[c]).collect();
        let (mu, cov) = dense_joint(l, sf2, sn2, xs, ys, &pts);
        let m = cells.len() as f64;
        let mean = mu.sum() / m;
        let var = (cov.sum() / (m * m)).max(0.0);
        let p = if var > 0.0 { 1.0 - std_normal.cdf((tau - mean) / var.sqrt()) } else if mean > tau { 1.0 } else { 0.0 };
        p > theta
    };
    let locked: Vec<bool> = regions.iter().map(|cells| claimed(xs, ys, cells)).collect();
    let quantiles: Vec<f64> = (0..q).map(|i| std_normal.inverse_cdf((i as f64 + 0.5) / q as f64)).collect();
    let prior = dense_posterior(l, sf2, sn2, xs, ys, centers);

    centers
        .iter()
        .enumerate()
        .map(|(x, cx)| {
            let (mu, var) = prior[x];
            let sd_y = (var + sn2).sqrt();
            let mut xs2 = xs.to_vec();
            xs2.push(*cx);
            let mut total = 0.0;
            for (g, cells) in regions.iter().enumerate() {
                if locked[g] {
                    total += 1.0;
                    continue;
                }
                let mut hits = 0usize;
                for z in &quantiles {
                    let mut ys2 = ys.to_vec();
                    ys2.push(mu + sd_y * z);
                    if claimed(&xs2, &ys2, cells) {
                        hits += 1;
                    }
                }
                total += hits as f64 / q as f64;
            }
            total
        })
        .collect()
}

/// Classical RK4 on the Dubins-car ODE with constant controls per segment.
pub fn rk4_dubins(q0: (f64, f64, f64), pairs: &[(f64, f64)], tau: f64, h: f64) -> (f64, f64, f64) {
    let f = |s: (f64, f64, f64), v: f64, w: f64| (v * s.2.cos(), v * s.2.sin(), w);
    let mut s = q0;
    for &(v, w) in pairs {
        let steps = (tau / h).round() as usize;
        let h = tau / steps as f64;
        for _ in 0..steps {
            let k1 = f(s, v, w);
            let k2 = f((s.0 + h / 2.0 * k1.0, s.1 + h / 2.0 * k1.1, s.2 + h / 2.0 * k1.2), v, w);
            let k3 = f((s.0 + h / 2.0 * k2.0, s.1 + h / 2.0 * k2.1, s.2 + h / 2.0 * k2.2), v, w);
            let k4 = f((s.0 + h * k3.0, s.1 + h * k3.1, s.2 + h * k3.2), v, w);
            s = (
                s.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                s.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
                s.2 + h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
            );
        }
    }
    s
}

/// Monte-Carlo mean and standard error of `max(y - incumbent, 0)` for `y ~ N(mean, sd^2)`.
pub fn ei_monte_carlo<R: rand::Rng>(mean: f64, sd: f64, incumbent: f64, n: usize, rng: &mut R) -> (f64, f64) {
    let mut s = 0.0;
    let mut s2 = 0.0;
    for _ in 0..n {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let v = (mean + sd * z - incumbent).max(0.0);
        s += v;
        s2 += v * v;
    }
    let m = s / n as f64;
    let var = (s2 / n as f64 - m * m).max(0.0);
    (m, (var / n as f64).sqrt())
}

/// OLS slope from the 2x2 normal equations `[n sum d; sum d sum d^2] b = [sum f; sum d f]`.
pub fn normal_equations_slope(d: &[f64], f: &[f64]) -> f64 {
    let n = d.len() as f64;
    let sd: f64 = d.iter().sum();
    let sdd: f64 = d.iter().map(|x| x * x).sum();
    let sf: f64 = f.iter().sum();
    let sdf: f64 = d.iter().zip(f).map(|(a, b)| a * b).sum();
    let a = nalgebra::Matrix2::new(n, sd, sd, sdd);
    let b = nalgebra::Vector2::new(sf, sdf);
    (a.lu().solve(&b).expect("non-singular"))[1]
}
