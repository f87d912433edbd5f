//! Dubins-car motion primitives and their exact rollout.
//!
//! A trajectory is `m` constant-control segments `(v, w)` of equal duration
//! `tau`. Each segment is a straight line (`w = 0`) or a circular arc of
//! radius `v / w`, so poses are available in closed form at any time.

use nalgebra::Point2;

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose<T> {
    pub x: T,
    pub y: T,
    /// Heading in radians, kept unwrapped.
    pub theta: T,
}

impl<T: Scalar> Pose<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Pose { x, y, theta }
    }

    pub fn position(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }

    /// Heading difference wrapped into `(-pi, pi]`.
    pub fn heading_error(&self, other: &Pose<T>) -> T {
        let two_pi = T::two_pi();
        let mut d = (self.theta - other.theta) % two_pi;
        if d > T::pi() {
            d -= two_pi;
        } else if d <= -T::pi() {
            d += two_pi;
        }
        d
    }

    /// Applies the rigid motion "rotate by `angle` then translate".
    pub fn transformed(&self, angle: T, tx: T, ty: T) -> Pose<T> {
        let (s, c) = angle.sin_cos();
        Pose {
            x: c * self.x - s * self.y + tx,
            y: s * self.x + c * self.y + ty,
            theta: self.theta + angle,
        }
    }
}

/// Admissible speed and turn-rate intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimitiveBounds<T> {
    pub v_min: T,
    pub v_max: T,
    pub w_min: T,
    pub w_max: T,
}

impl<T: Scalar> PrimitiveBounds<T> {
    pub fn new(v_min: T, v_max: T, w_min: T, w_max: T) -> Result<Self> {
        if !(v_min <= v_max) || !(w_min <= w_max) {
            return Err(invalid("bounds", "need v_min <= v_max and w_min <= w_max"));
        }
        Ok(PrimitiveBounds { v_min, v_max, w_min, w_max })
    }

    pub fn contains(&self, v: T, w: T) -> bool {
        v >= self.v_min && v <= self.v_max && w >= self.w_min && w <= self.w_max
    }
}

/// `z = (v1, w1, ..., vm, wm)` with a shared segment duration.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveParams<T> {
    pub pairs: Vec<(T, T)>,
    pub tau: T,
    pub bounds: PrimitiveBounds<T>,
}

impl<T: Scalar> PrimitiveParams<T> {
    /// Validated constructor: non-empty, positive duration, every pair in bounds.
    pub fn new(pairs: Vec<(T, T)>, tau: T, bounds: PrimitiveBounds<T>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(invalid("pairs", "need at least one primitive"));
        }
        if !(tau > T::zero()) {
            return Err(invalid("tau", "must be positive"));
        }
        if let Some(i) = pairs.iter().position(|&(v, w)| !bounds.contains(v, w)) {
            return Err(invalid("pairs", format!("primitive {i} is outside its bounds")));
        }
        Ok(PrimitiveParams { pairs, tau, bounds })
    }

    /// Reads a flat vector, clamping into bounds.
    pub fn from_flat(z: &[T], tau: T, bounds: PrimitiveBounds<T>) -> Result<Self> {
        if z.is_empty() || z.len() % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: 2 * (z.len() / 2).max(1), found: z.len() });
        }
        let pairs = z.chunks(2).map(|c| (c[0], c[1])).collect();
        Ok(PrimitiveParams { pairs, tau, bounds }.clamp())
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.pairs.iter().flat_map(|&(v, w)| [v, w]).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn duration(&self) -> T {
        self.tau * lit(self.pairs.len() as f64)
    }

    /// Componentwise projection into the bounds. Idempotent.
    pub fn clamp(&self) -> Self {
        let b = &self.bounds;
        PrimitiveParams {
            pairs: self
                .pairs
                .iter()
                .map(|&(v, w)| (v.clamp(b.v_min, b.v_max), w.clamp(b.w_min, b.w_max)))
                .collect(),
            tau: self.tau,
            bounds: self.bounds,
        }
    }
}

/// Time-stamped poses along a rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct Path<T> {
    pub poses: Vec<Pose<T>>,
    pub times: Vec<T>,
}

impl<T: Scalar> Path<T> {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn end(&self) -> Option<&Pose<T>> {
        self.poses.last()
    }
}

/// Pose after holding `(v, w)` for `s` seconds from `q`.
///
/// Uses `sin(a+b) - sin(a) = 2 cos(a + b/2) sin(b/2)`, which stays accurate as
/// `w` shrinks; below `1e-8 / tau` the straight-line formula is used.
pub fn propagate<T: Scalar>(q: &Pose<T>, v: T, w: T, s: T, tau: T) -> Pose<T> {
    let straight = w.abs() < lit::<T>(1e-8) / tau;
    if straight {
        let (sn, cs) = q.theta.sin_cos();
        return Pose { x: q.x + v * s * cs, y: q.y + v * s * sn, theta: q.theta };
    }
    let half = w * s / lit(2.0);
    let chord = lit::<T>(2.0) * v / w * half.sin();
    let (sn, cs) = (q.theta + half).sin_cos();
    Pose { x: q.x + chord * cs, y: q.y + chord * sn, theta: q.theta + w * s }
}

/// Exact rollout sampled every `dt` within each primitive plus every
/// primitive endpoint. The first sample is `q0` at time 0.
pub fn rollout<T: Scalar>(q0: &Pose<T>, params: &PrimitiveParams<T>, dt: T) -> Result<Path<T>> {
    if !(dt > T::zero()) || dt > params.tau * (T::one() + T::eps() * lit(16.0)) {
        return Err(invalid("dt", "must satisfy 0 < dt <= tau"));
    }
    let tau = params.tau;
    let per = (crate::scalar::to_f64(tau / dt)).ceil() as usize;
    let mut poses = Vec::with_capacity(params.len() * per + 1);
    let mut times = Vec::with_capacity(params.len() * per + 1);
    poses.push(*q0);
    times.push(T::zero());
    let guard = dt * lit(1e-6);
    let mut start = *q0;
    for (j, &(v, w)) in params.pairs.iter().enumerate() {
        let t0 = tau * lit(j as f64);
        let mut k = 1usize;
        loop {
            let s = dt * lit(k as f64);
            if s >= tau - guard {
                break;
            }
            poses.push(propagate(&start, v, w, s, tau));
            times.push(t0 + s);
            k += 1;
        }
        let end = propagate(&start, v, w, tau, tau);
        poses.push(end);
        times.push(t0 + tau);
        start = end;
    }
    Ok(Path { poses, times })
}

/// Sum of chord lengths between successive poses.
pub fn path_length<T: Scalar>(path: &Path<T>) -> T {
    path.poses
        .windows(2)
        .map(|w| (w[1].position() - w[0].position()).norm())
        .fold(T::zero(), |a, b| a + b)
}
