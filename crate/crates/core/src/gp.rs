//! Gaussian-process regression over the plane with a squared-exponential
//! kernel, optional input-location uncertainty, and Cholesky-based prediction.
//!
//! The model keeps a zero prior mean in a standardized target space. When
//! [`TargetScaling::Standardize`] is selected, targets are shifted by their
//! mean and divided by their standard deviation before fitting, and every
//! prediction is mapped back to the original units.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix2, Point2};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

/// Squared-exponential covariance with additive observation noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel<T> {
    lengthscale: T,
    signal_variance: T,
    noise_variance: T,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(lengthscale: T, signal_variance: T, noise_variance: T) -> Result<Self> {
        if !(lengthscale > T::zero()) || !lengthscale.is_finite() {
            return Err(invalid("lengthscale", "must be positive and finite"));
        }
        if !(signal_variance > T::zero()) || !signal_variance.is_finite() {
            return Err(invalid("signal_variance", "must be positive and finite"));
        }
        if !(noise_variance >= T::zero()) || !noise_variance.is_finite() {
            return Err(invalid("noise_variance", "must be non-negative and finite"));
        }
        Ok(Kernel { lengthscale, signal_variance, noise_variance })
    }

    pub fn lengthscale(&self) -> T {
        self.lengthscale
    }

    pub fn signal_variance(&self) -> T {
        self.signal_variance
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    /// `sf2 * exp(-|a - b|^2 / (2 l^2))`.
    #[inline]
    pub fn eval(&self, a: &Point2<T>, b: &Point2<T>) -> T {
        let d = a - b;
        let l2 = self.lengthscale * self.lengthscale;
        self.signal_variance * (-(d.norm_squared()) / (l2 + l2)).exp()
    }

    /// Expected kernel value when both inputs carry independent Gaussian
    /// location noise with covariances `s1` and `s2`:
    ///
    /// `sf2 |I + (S1+S2)/l^2|^(-1/2) exp(-1/2 d^T (l^2 I + S1 + S2)^(-1) d)`.
    pub fn eval_corrected(
        &self,
        a: &Point2<T>,
        b: &Point2<T>,
        s1: &Matrix2<T>,
        s2: &Matrix2<T>,
    ) -> Result<T> {
        check_psd(s1)?;
        check_psd(s2)?;
        Ok(self.corrected_unchecked(a, b, &(s1 + s2)))
    }

    fn corrected_unchecked(&self, a: &Point2<T>, b: &Point2<T>, s: &Matrix2<T>) -> T {
        let l2 = self.lengthscale * self.lengthscale;
        let m = Matrix2::new(l2 + s[(0, 0)], s[(0, 1)], s[(1, 0)], l2 + s[(1, 1)]);
        let det_m = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        // |I + S/l^2| = |l^2 I + S| / l^4
        let det_ratio = det_m / (l2 * l2);
        let d = a - b;
        // d^T M^-1 d for a 2x2 M via its adjugate
        let quad = (m[(1, 1)] * d.x * d.x - (m[(0, 1)] + m[(1, 0)]) * d.x * d.y
            + m[(0, 0)] * d.y * d.y)
            / det_m;
        self.signal_variance / det_ratio.sqrt() * (-(quad) / lit(2.0)).exp()
    }
}

/// Rejects covariance matrices that are asymmetric or have a negative eigenvalue.
fn check_psd<T: Scalar>(s: &Matrix2<T>) -> Result<()> {
    let scale = s.abs().max().max(T::one());
    let tol = T::eps() * lit(64.0) * scale;
    if (s[(0, 1)] - s[(1, 0)]).abs() > tol {
        return Err(Error::NotPsd);
    }
    let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
    if s[(0, 0)] < -tol || s[(1, 1)] < -tol || det < -tol * scale {
        return Err(Error::NotPsd);
    }
    Ok(())
}

/// How targets are mapped into the zero-mean GP space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TargetScaling {
    /// Fit the raw targets directly.
    None,
    /// Subtract the sample mean and divide by the sample standard deviation.
    #[default]
    Standardize,
}

/// Posterior marginal at one query point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction<T> {
    pub mean: T,
    pub variance: T,
}

/// A fitted (or prior) Gaussian process. Immutable once built.
#[derive(Clone, Debug)]
pub struct GpModel<T: Scalar> {
    kernel: Kernel<T>,
    inputs: Vec<Point2<T>>,
    targets: Vec<T>,
    input_noise: Option<Vec<Matrix2<T>>>,
    scaling: TargetScaling,
    offset: T,
    scale: T,
    jitter: T,
    chol: Option<Cholesky<T, Dyn>>,
    alpha: DVector<T>,
}

impl<T: Scalar> GpModel<T> {
    /// GP with no data.
    pub fn prior(kernel: Kernel<T>) -> Self {
        GpModel {
            kernel,
            inputs: Vec::new(),
            targets: Vec::new(),
            input_noise: None,
            scaling: TargetScaling::None,
            offset: T::zero(),
            scale: T::one(),
            jitter: T::zero(),
            chol: None,
            alpha: DVector::zeros(0),
        }
    }

    /// Builds and factors the Gram matrix for `points`/`targets`.
    ///
    /// With `input_noise`, off-diagonal entries use the corrected kernel; the
    /// diagonal stays `sf2 + sn2` since a point shares its own noise draw.
    pub fn fit(
        kernel: Kernel<T>,
        points: &[Point2<T>],
        targets: &[T],
        input_noise: Option<&[Matrix2<T>]>,
        scaling: TargetScaling,
    ) -> Result<Self> {
        let n = points.len();
        if targets.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: targets.len() });
        }
        if let Some(noise) = input_noise {
            if noise.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: noise.len() });
            }
            for s in noise {
                check_psd(s)?;
            }
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(invalid("targets", "must be finite"));
        }

        let (offset, scale) = match scaling {
            TargetScaling::None => (T::zero(), T::one()),
            TargetScaling::Standardize => standardization(targets),
        };
        let mut model = GpModel {
            kernel,
            inputs: points.to_vec(),
            targets: targets.to_vec(),
            input_noise: input_noise.map(|s| s.to_vec()),
            scaling,
            offset,
            scale,
            jitter: T::zero(),
            chol: None,
            alpha: DVector::zeros(n),
        };
        if n == 0 {
            return Ok(model);
        }

        let gram = model.gram();
        let (chol, jitter) = factor_with_jitter(gram, kernel.signal_variance)?;
        let y = DVector::from_iterator(n, targets.iter().map(|&t| (t - offset) / scale));
        model.alpha = chol.solve(&y);
        model.chol = Some(chol);
        model.jitter = jitter;
        Ok(model)
    }

    /// Refits with one more observation appended.
    pub fn with_observation(&self, point: Point2<T>, target: T, noise: Option<Matrix2<T>>) -> Result<Self> {
        let mut points = self.inputs.clone();
        let mut targets = self.targets.clone();
        points.push(point);
        targets.push(target);
        let noise = match (&self.input_noise, noise) {
            (None, None) => None,
            (prev, new) => {
                let mut all = prev.clone().unwrap_or_else(|| vec![Matrix2::zeros(); self.len()]);
                all.push(new.unwrap_or_else(Matrix2::zeros));
                Some(all)
            }
        };
        GpModel::fit(self.kernel, &points, &targets, noise.as_deref(), self.scaling)
    }

    fn gram(&self) -> DMatrix<T> {
        let n = self.inputs.len();
        let sf2 = self.kernel.signal_variance;
        let sn2 = self.kernel.noise_variance;
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = sf2 + sn2;
            for j in 0..i {
                let v = match &self.input_noise {
                    Some(s) => {
                        self.kernel.corrected_unchecked(&self.inputs[i], &self.inputs[j], &(s[i] + s[j]))
                    }
                    None => self.kernel.eval(&self.inputs[i], &self.inputs[j]),
                };
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Point2<T>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn input_noise(&self) -> Option<&[Matrix2<T>]> {
        self.input_noise.as_deref()
    }

    pub fn scaling(&self) -> TargetScaling {
        self.scaling
    }

    /// Multiplier mapping standardized values to output units.
    pub fn output_scale(&self) -> T {
        self.scale
    }

    pub fn output_offset(&self) -> T {
        self.offset
    }

    /// Diagonal jitter that was needed to factor the Gram matrix (0 if none).
    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// Observation-noise variance expressed in output units.
    pub fn noise_variance_out(&self) -> T {
        self.kernel.noise_variance * self.scale * self.scale
    }

    /// `k(q, X)` in standardized units, using the corrected kernel against
    /// noisy training inputs (the query itself is taken as exact).
    pub fn cross_cov(&self, q: &Point2<T>) -> DVector<T> {
        let n = self.len();
        match &self.input_noise {
            Some(s) => DVector::from_iterator(
                n,
                self.inputs.iter().zip(s).map(|(x, s)| self.kernel.corrected_unchecked(q, x, s)),
            ),
            None => DVector::from_iterator(n, self.inputs.iter().map(|x| self.kernel.eval(q, x))),
        }
    }

    /// `L^-1 k(X, q)`; posterior covariance between two queries is
    /// `scale^2 (k(a, b) - w_a . w_b)`.
    pub fn whitened(&self, q: &Point2<T>) -> DVector<T> {
        let k = self.cross_cov(q);
        match &self.chol {
            Some(c) => c
                .l_dirty()
                .solve_lower_triangular(&k)
                .expect("Cholesky factor has a non-zero diagonal"),
            None => k,
        }
    }

    /// Standardized posterior mean from a precomputed cross-covariance.
    fn mean_std(&self, k: &DVector<T>) -> T {
        if self.is_empty() {
            T::zero()
        } else {
            k.dot(&self.alpha)
        }
    }

    pub fn predict_one(&self, q: &Point2<T>) -> Result<Prediction<T>> {
        let k = self.cross_cov(q);
        let mean = self.mean_std(&k);
        let var = match &self.chol {
            Some(c) => {
                let w = c
                    .l_dirty()
                    .solve_lower_triangular(&k)
                    .expect("Cholesky factor has a non-zero diagonal");
                self.kernel.signal_variance - w.norm_squared()
            }
            None => self.kernel.signal_variance,
        };
        Ok(Prediction {
            mean: self.offset + self.scale * mean,
            variance: self.scale * self.scale * self.clamp_variance(var)?,
        })
    }

    /// Batch prediction; parallel over queries, output in query order.
    pub fn predict(&self, queries: &[Point2<T>]) -> Result<Vec<Prediction<T>>> {
        queries.par_iter().map(|q| self.predict_one(q)).collect()
    }

    /// Tiny negative variances from round-off are clamped to zero; anything
    /// more negative means the factorization is unusable.
    pub(crate) fn clamp_variance(&self, var: T) -> Result<T> {
        if var >= T::zero() {
            return Ok(var);
        }
        let tol = self.kernel.signal_variance * lit::<T>(1e-9).max(T::eps() * lit(1024.0));
        if var >= -tol {
            Ok(T::zero())
        } else {
            Err(Error::NegativeVariance { value: to_f64(var) })
        }
    }
}

fn standardization<T: Scalar>(targets: &[T]) -> (T, T) {
    let n = targets.len();
    if n == 0 {
        return (T::zero(), T::one());
    }
    let nf = lit::<T>(n as f64);
    let mean = targets.iter().fold(T::zero(), |a, &b| a + b) / nf;
    let var = targets.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean)) / nf;
    let sd = var.sqrt();
    // constant or single-point data: keep unit scale
    let floor = T::eps().sqrt() * mean.abs().max(T::one());
    if sd > floor {
        (mean, sd)
    } else {
        (mean, T::one())
    }
}

/// Cholesky with escalating diagonal jitter `1e-10 sf2 .. 1e-4 sf2`.
fn factor_with_jitter<T: Scalar>(gram: DMatrix<T>, sf2: T) -> Result<(Cholesky<T, Dyn>, T)> {
    if let Some(c) = Cholesky::new(gram.clone()) {
        return Ok((c, T::zero()));
    }
    let n = gram.nrows();
    let mut rel = 1e-10;
    while rel <= 1e-4 * 1.000_001 {
        let jitter = sf2 * lit(rel);
        let mut m = gram.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, jitter));
        }
        rel *= 10.0;
    }
    Err(Error::NotPositiveDefinite {
        min_jitter: 1e-10 * to_f64(sf2),
        max_jitter: 1e-4 * to_f64(sf2),
    })
}
