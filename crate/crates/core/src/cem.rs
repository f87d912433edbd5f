//! Cross-entropy optimization with a Gaussian-mixture sampling distribution.
//!
//! Each iteration draws candidates from the mixture, evaluates them (in
//! parallel), keeps the lowest-cost elite fraction and refits the mixture to
//! the elites by expectation maximization. Infeasible candidates carry an
//! infinite cost and can never enter the elite set.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct GmmComponent<T: Scalar> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    pub weight: T,
}

/// Mixture `sum_k w_k N(mu_k, Sigma_k)` over `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmParams<T: Scalar> {
    components: Vec<GmmComponent<T>>,
}

impl<T: Scalar> GmmParams<T> {
    /// Validates dimensions and positive definiteness; weights are renormalized.
    pub fn new(mut components: Vec<GmmComponent<T>>) -> Result<Self> {
        let first = components.first().ok_or_else(|| invalid("components", "need K >= 1"))?;
        let d = first.mean.len();
        let mut total = T::zero();
        for c in &components {
            if c.mean.len() != d || c.cov.nrows() != d || c.cov.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.mean.len() });
            }
            if !(c.weight >= T::zero()) {
                return Err(invalid("weight", "must be non-negative"));
            }
            if Cholesky::new(c.cov.clone()).is_none() {
                return Err(invalid("cov", "must be symmetric positive definite"));
            }
            total += c.weight;
        }
        if !(total > T::zero()) {
            return Err(invalid("weight", "weights must not all be zero"));
        }
        for c in &mut components {
            c.weight /= total;
        }
        Ok(GmmParams { components })
    }

    /// Single Gaussian with diagonal covariance `diag(variances)`.
    pub fn diagonal(mean: DVector<T>, variances: &[T]) -> Result<Self> {
        let cov = DMatrix::from_diagonal(&DVector::from_column_slice(variances));
        GmmParams::new(vec![GmmComponent { mean, cov, weight: T::one() }])
    }

    pub fn components(&self) -> &[GmmComponent<T>] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    /// Largest covariance eigenvalue across components.
    pub fn max_eigenvalue(&self) -> T {
        self.components
            .iter()
            .map(|c| SymmetricEigen::new(c.cov.clone()).eigenvalues.max())
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn min_eigenvalue(&self) -> T {
        self.components
            .iter()
            .map(|c| SymmetricEigen::new(c.cov.clone()).eigenvalues.min())
            .fold(T::inf(), |a, b| a.min(b))
    }

    /// Replaces the first component's mean (warm start from a previous optimum).
    pub fn with_first_mean(mut self, mean: DVector<T>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: mean.len() });
        }
        self.components[0].mean = mean;
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CemConfig<T> {
    pub n_samples: usize,
    pub elite_frac: T,
    pub max_iters: usize,
    pub min_covariance_floor: T,
    pub convergence_tol: T,
    pub seed: u64,
    /// Mixture components fitted to the elites.
    pub components: usize,
    pub em_iters: usize,
    /// Weight of the refitted distribution when blending with the previous
    /// one (1 = no smoothing). Applied only for single-component mixtures.
    pub smoothing: T,
}

impl<T: Scalar> Default for CemConfig<T> {
    fn default() -> Self {
        CemConfig {
            n_samples: 200,
            elite_frac: lit(0.1),
            max_iters: 30,
            min_covariance_floor: lit(1e-6),
            convergence_tol: lit(1e-4),
            seed: 0,
            components: 1,
            em_iters: 20,
            smoothing: lit(0.7),
        }
    }
}

impl<T: Scalar> CemConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.max_iters == 0 || self.components == 0 {
            return Err(invalid("cem", "n_samples, max_iters and components must be positive"));
        }
        if !(self.elite_frac > T::zero() && self.elite_frac < T::one()) {
            return Err(invalid("elite_frac", "must lie in (0, 1)"));
        }
        if lit::<T>(self.n_samples as f64) * self.elite_frac < lit(2.0) {
            return Err(invalid("elite_frac", "n_samples * elite_frac must be at least 2"));
        }
        if !(self.smoothing > T::zero() && self.smoothing <= T::one()) {
            return Err(invalid("smoothing", "must lie in (0, 1]"));
        }
        if !(self.min_covariance_floor >= T::zero()) || !(self.convergence_tol > T::zero()) {
            return Err(invalid("cem", "floor must be >= 0 and tolerance > 0"));
        }
        Ok(())
    }

    pub fn elite_count(&self, n: usize) -> usize {
        let c = (to_f64(self.elite_frac) * n as f64 - 1e-9).ceil() as usize;
        c.clamp(1, n.max(1))
    }
}

fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<T> {
    DVector::from_iterator(d, (0..d).map(|_| lit(rng.sample::<f64, _>(StandardNormal))))
}

/// `n` i.i.d. draws: a component chosen by weight, then its Gaussian.
pub fn sample<T: Scalar, R: Rng + ?Sized>(gmm: &GmmParams<T>, n: usize, rng: &mut R) -> Vec<DVector<T>> {
    let factors: Vec<DMatrix<T>> = gmm
        .components
        .iter()
        .map(|c| Cholesky::new(c.cov.clone()).map(|l| l.unpack()).unwrap_or_else(|| psd_root(&c.cov)))
        .collect();
    let d = gmm.dim();
    (0..n)
        .map(|_| {
            let k = pick_component(gmm, rng);
            let z = standard_normal::<T, _>(rng, d);
            &gmm.components[k].mean + &factors[k] * z
        })
        .collect()
}

fn pick_component<T: Scalar, R: Rng + ?Sized>(gmm: &GmmParams<T>, rng: &mut R) -> usize {
    if gmm.components.len() == 1 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, c) in gmm.components.iter().enumerate() {
        acc += to_f64(c.weight);
        if u < acc {
            return k;
        }
    }
    // round-off: fall back to the last component with positive weight
    gmm.components.iter().rposition(|c| c.weight > T::zero()).unwrap_or(0)
}

/// Square root of a symmetric PSD matrix through its eigendecomposition.
fn psd_root<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|v| v.max(T::zero()).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals)
}

/// Keeps the `ceil(elite_frac n)` lowest finite costs and fits a `k`-component
/// mixture to them (for `k = 1`: the elite mean and maximum-likelihood
/// covariance). `floor * I` is added to every covariance.
pub fn elite_update<T: Scalar, R: Rng + ?Sized>(
    samples: &[DVector<T>],
    costs: &[T],
    config: &CemConfig<T>,
    k: usize,
    rng: &mut R,
) -> Result<GmmParams<T>> {
    if samples.len() != costs.len() {
        return Err(Error::DimensionMismatch { expected: samples.len(), found: costs.len() });
    }
    let mut order: Vec<usize> = (0..costs.len()).filter(|&i| costs[i].is_finite()).collect();
    if order.is_empty() {
        return Err(Error::NoFeasibleSamples);
    }
    order.sort_by(|&a, &b| costs[a].partial_cmp(&costs[b]).unwrap().then(a.cmp(&b)));
    order.truncate(config.elite_count(samples.len()));
    let elites: Vec<&DVector<T>> = order.iter().map(|&i| &samples[i]).collect();
    fit_mixture(&elites, k.max(1), config, rng)
}

fn fit_mixture<T: Scalar, R: Rng + ?Sized>(
    points: &[&DVector<T>],
    k: usize,
    config: &CemConfig<T>,
    rng: &mut R,
) -> Result<GmmParams<T>> {
    let n = points.len();
    let d = points[0].len();
    let floor = DMatrix::<T>::identity(d, d) * config.min_covariance_floor;
    let k = k.min(n);

    if k == 1 {
        let (mean, cov) = weighted_moments(points, &vec![T::one(); n]);
        return GmmParams::new(vec![GmmComponent { mean, cov: cov + floor, weight: T::one() }]);
    }

    // k-means++ seeding, then EM on responsibilities
    let centers = kmeans_pp(points, k, rng);
    let mut resp = DMatrix::<T>::zeros(n, k);
    for (i, p) in points.iter().enumerate() {
        let j = nearest(p, &centers);
        resp[(i, j)] = T::one();
    }
    let mut comps = m_step(points, &resp, &floor);
    for _ in 0..config.em_iters {
        let Some(r) = e_step(points, &comps) else { break };
        resp = r;
        comps = m_step(points, &resp, &floor);
    }
    GmmParams::new(comps)
}

fn weighted_moments<T: Scalar>(points: &[&DVector<T>], w: &[T]) -> (DVector<T>, DMatrix<T>) {
    let d = points[0].len();
    let total = w.iter().fold(T::zero(), |a, &b| a + b);
    let mut mean = DVector::zeros(d);
    for (p, &wi) in points.iter().zip(w) {
        mean += *p * wi;
    }
    mean /= total;
    let mut cov = DMatrix::zeros(d, d);
    for (p, &wi) in points.iter().zip(w) {
        let c = *p - &mean;
        cov += &c * c.transpose() * wi;
    }
    cov /= total;
    (mean, cov)
}

fn m_step<T: Scalar>(points: &[&DVector<T>], resp: &DMatrix<T>, floor: &DMatrix<T>) -> Vec<GmmComponent<T>> {
    let n = lit::<T>(points.len() as f64);
    let tiny = T::eps() * lit(1e3);
    (0..resp.ncols())
        .filter_map(|j| {
            let w: Vec<T> = resp.column(j).iter().copied().collect();
            let nk = w.iter().fold(T::zero(), |a, &b| a + b);
            if nk <= tiny {
                return None;
            }
            let (mean, cov) = weighted_moments(points, &w);
            Some(GmmComponent { mean, cov: cov + floor, weight: nk / n })
        })
        .collect()
}

fn e_step<T: Scalar>(points: &[&DVector<T>], comps: &[GmmComponent<T>]) -> Option<DMatrix<T>> {
    let chols: Vec<Cholesky<T, Dyn>> =
        comps.iter().map(|c| Cholesky::new(c.cov.clone())).collect::<Option<_>>()?;
    let mut resp = DMatrix::zeros(points.len(), comps.len());
    for (i, p) in points.iter().enumerate() {
        let logs: Vec<T> = comps
            .iter()
            .zip(&chols)
            .map(|(c, l)| {
                let diff = *p - &c.mean;
                let y = l.l_dirty().solve_lower_triangular(&diff).expect("non-singular factor");
                let logdet = l.l_dirty().diagonal().map(|v| v.ln()).sum();
                c.weight.ln() - logdet - y.norm_squared() / lit(2.0)
            })
            .collect();
        let mx = logs.iter().copied().fold(-T::inf(), |a, b| a.max(b));
        let z = logs.iter().fold(T::zero(), |a, &b| a + (b - mx).exp());
        for (j, &l) in logs.iter().enumerate() {
            resp[(i, j)] = (l - mx).exp() / z;
        }
    }
    Some(resp)
}

fn nearest<T: Scalar>(p: &DVector<T>, centers: &[DVector<T>]) -> usize {
    let mut best = 0;
    let mut best_d = T::inf();
    for (j, c) in centers.iter().enumerate() {
        let d = (p - c).norm_squared();
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn kmeans_pp<T: Scalar, R: Rng + ?Sized>(points: &[&DVector<T>], k: usize, rng: &mut R) -> Vec<DVector<T>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| to_f64((*p - c).norm_squared())).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[idx].clone());
    }
    centers
}

fn smooth<T: Scalar>(old: &GmmParams<T>, new: GmmParams<T>, a: T) -> GmmParams<T> {
    if a >= T::one() || old.components.len() != 1 || new.components.len() != 1 {
        return new;
    }
    let (o, n) = (&old.components[0], &new.components[0]);
    let b = T::one() - a;
    let mean = &n.mean * a + &o.mean * b;
    // convex combination of SPD matrices stays SPD and above the floor
    let cov = &n.cov * a + &o.cov * b;
    GmmParams { components: vec![GmmComponent { mean, cov, weight: T::one() }] }
}

/// One row of the optimizer trace.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    /// Best cost sampled in this iteration.
    pub iteration_best: T,
    /// Best cost seen so far.
    pub best_cost: T,
    pub max_eigenvalue: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CemOutcome<T: Scalar> {
    pub best: DVector<T>,
    pub best_cost: T,
    pub trace: Vec<IterationRecord<T>>,
    pub final_gmm: GmmParams<T>,
}

/// Runs sample / evaluate / refit until `max_iters` or until the largest
/// covariance eigenvalue drops below `convergence_tol`. Returns the best
/// sample ever evaluated.
pub fn optimize<T, F>(cost: F, gmm0: GmmParams<T>, config: &CemConfig<T>) -> Result<CemOutcome<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut gmm = gmm0;
    let mut best: Option<(DVector<T>, T)> = None;
    let mut trace = Vec::new();

    for iteration in 0..config.max_iters {
        let samples = sample(&gmm, config.n_samples, &mut rng);
        let costs: Vec<T> = samples
            .par_iter()
            .map(|z| {
                let c = cost(z.as_slice());
                if c.is_finite() {
                    c
                } else {
                    T::inf()
                }
            })
            .collect();

        let mut iteration_best = T::inf();
        for (z, &c) in samples.iter().zip(&costs) {
            if c < iteration_best {
                iteration_best = c;
            }
            if c.is_finite() && best.as_ref().is_none_or(|(_, b)| c < *b) {
                best = Some((z.clone(), c));
            }
        }

        let fitted = elite_update(&samples, &costs, config, config.components, &mut rng)?;
        gmm = smooth(&gmm, fitted, config.smoothing);
        let max_eig = gmm.max_eigenvalue();
        trace.push(IterationRecord {
            iteration,
            iteration_best,
            best_cost: best.as_ref().map_or(T::inf(), |b| b.1),
            max_eigenvalue: max_eig,
        });
        if max_eig < config.convergence_tol {
            break;
        }
    }

    let (best, best_cost) = best.ok_or(Error::NoFeasibleSamples)?;
    Ok(CemOutcome { best, best_cost, trace, final_gmm: gmm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn degenerate_gaussian_samples_stay_at_mean() {
        let g = GmmParams::diagonal(v(&[1.0, -2.0]), &[1e-12, 1e-12]).unwrap();
        for s in sample(&g, 50, &mut rng()) {
            assert!((s[0] - 1.0).abs() < 1e-4 && (s[1] + 2.0).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_weight_component_never_sampled() {
        let comps = vec![
            GmmComponent { mean: v(&[0.0]), cov: DMatrix::identity(1, 1) * 0.01, weight: 1.0 },
            GmmComponent { mean: v(&[100.0]), cov: DMatrix::identity(1, 1) * 0.01, weight: 0.0 },
        ];
        let g = GmmParams::new(comps).unwrap();
        assert!(sample(&g, 1000, &mut rng()).iter().all(|s| s[0].abs() < 5.0));
    }

    #[test]
    fn sample_mean_converges() {
        let g = GmmParams::diagonal(v(&[0.5, -1.0]), &[4.0, 1.0]).unwrap();
        let n = 1_000_000;
        let mut m = DVector::zeros(2);
        for s in sample(&g, n, &mut rng()) {
            m += s;
        }
        m /= n as f64;
        // 4 sigma / sqrt(n) with sigma = (2, 1)
        assert!((m[0] - 0.5).abs() < 4.0 * 2.0 / 1000.0);
        assert!((m[1] + 1.0).abs() < 4.0 * 1.0 / 1000.0);
    }

    #[test]
    fn k1_elite_update_closed_form() {
        let pts = [v(&[0.0, 0.0]), v(&[2.0, 0.0]), v(&[0.0, 2.0]), v(&[2.0, 2.0]), v(&[9.0, 9.0])];
        let costs = [1.0, 2.0, 3.0, 4.0, 100.0];
        let cfg = CemConfig { elite_frac: 0.8, min_covariance_floor: 1e-3, ..CemConfig::default() };
        let g = elite_update(&pts, &costs, &cfg, 1, &mut rng()).unwrap();
        let c = &g.components()[0];
        assert!((c.mean[0] - 1.0).abs() < 1e-15 && (c.mean[1] - 1.0).abs() < 1e-15);
        assert!((c.cov[(0, 0)] - 1.001).abs() < 1e-12 && (c.cov[(1, 1)] - 1.001).abs() < 1e-12);
        assert!(c.cov[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn identical_elites_give_floor_covariance() {
        let pts = vec![v(&[0.3, 0.7]); 10];
        let costs = vec![1.0; 10];
        let cfg = CemConfig { elite_frac: 0.5, min_covariance_floor: 1e-6, ..CemConfig::default() };
        let g = elite_update(&pts, &costs, &cfg, 1, &mut rng()).unwrap();
        let c = &g.components()[0];
        assert_eq!(c.mean, v(&[0.3, 0.7]));
        assert!((c.cov.clone() - DMatrix::identity(2, 2) * 1e-6).norm() < 1e-18);
    }

    #[test]
    fn all_infinite_costs_error() {
        let pts = vec![v(&[0.0]); 4];
        let costs = vec![f64::INFINITY; 4];
        let cfg = CemConfig { elite_frac: 0.5, ..CemConfig::default() };
        assert_eq!(elite_update(&pts, &costs, &cfg, 1, &mut rng()), Err(Error::NoFeasibleSamples));
    }

    #[test]
    fn two_cluster_em_recovers_centroids() {
        let mut r = rng();
        let mut pts = Vec::new();
        for _ in 0..200 {
            let a: f64 = r.sample(StandardNormal);
            let b: f64 = r.sample(StandardNormal);
            pts.push(v(&[-5.0 + 0.2 * a, 0.2 * b]));
            let a: f64 = r.sample(StandardNormal);
            let b: f64 = r.sample(StandardNormal);
            pts.push(v(&[5.0 + 0.2 * a, 3.0 + 0.2 * b]));
        }
        let costs = vec![0.0; pts.len()];
        let cfg = CemConfig { n_samples: pts.len(), elite_frac: 0.999, ..CemConfig::default() };
        let g = elite_update(&pts, &costs, &cfg, 2, &mut r).unwrap();
        assert_eq!(g.components().len(), 2);
        let mut means: Vec<_> = g.components().iter().map(|c| c.mean.clone()).collect();
        means.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert!((means[0].clone() - v(&[-5.0, 0.0])).norm() < 0.1);
        assert!((means[1].clone() - v(&[5.0, 3.0])).norm() < 0.1);
        let wsum: f64 = g.components().iter().map(|c| c.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_optimum_found() {
        let target = [1.0, -1.0, 0.5, 0.0];
        let cost = |z: &[f64]| z.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let cfg = CemConfig {
            n_samples: 100,
            elite_frac: 0.1,
            max_iters: 50,
            min_covariance_floor: 0.0,
            convergence_tol: 1e-14,
            seed: 11,
            ..CemConfig::default()
        };
        let g0 = GmmParams::diagonal(DVector::zeros(4), &[1.0; 4]).unwrap();
        let out = optimize(cost, g0, &cfg).unwrap();
        assert!(out.best_cost.sqrt() < 1e-2, "{} after {}", out.best_cost, out.trace.len());
    }

    #[test]
    fn constant_cost_and_infeasible_half_space() {
        let cfg = CemConfig { n_samples: 50, max_iters: 5, ..CemConfig::default() };
        let g0 = GmmParams::diagonal(DVector::zeros(2), &[1.0, 1.0]).unwrap();
        let out = optimize(|_: &[f64]| 7.0, g0.clone(), &cfg).unwrap();
        assert_eq!(out.trace[0].best_cost, 7.0);
        assert_eq!(out.best_cost, 7.0);

        let cost = |z: &[f64]| if z[0] > 0.0 { f64::INFINITY } else { z[1] * z[1] };
        let out = optimize(cost, g0, &cfg).unwrap();
        assert!(out.best[0] <= 0.0 && out.best_cost.is_finite());
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = CemConfig { n_samples: 10, elite_frac: 0.1, ..CemConfig::<f64>::default() };
        assert!(cfg.validate().is_err());
    }
}
