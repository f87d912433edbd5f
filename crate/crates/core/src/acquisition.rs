//! Acquisition fields over a discretized domain: active area search (AAS),
//! level-set estimation (LSE), uncertainty sampling (UNC) and expected
//! improvement (EI), plus region-level classification.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Point2};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gp::GpModel;
pub use crate::grid::{DomainGrid, Rect};
use crate::scalar::{lit, norm_cdf, norm_pdf, norm_quantile, Scalar};

/// The four acquisition strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AcquisitionKind {
    Aas,
    Lse,
    Unc,
    Ei,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 4] =
        [AcquisitionKind::Aas, AcquisitionKind::Lse, AcquisitionKind::Unc, AcquisitionKind::Ei];

    pub fn as_str(&self) -> &'static str {
        match self {
            AcquisitionKind::Aas => "aas",
            AcquisitionKind::Lse => "lse",
            AcquisitionKind::Unc => "unc",
            AcquisitionKind::Ei => "ei",
        }
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AcquisitionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aas" => Ok(AcquisitionKind::Aas),
            "lse" => Ok(AcquisitionKind::Lse),
            "unc" => Ok(AcquisitionKind::Unc),
            "ei" => Ok(AcquisitionKind::Ei),
            other => Err(format!("unknown acquisition kind `{other}` (expected aas, lse, unc or ei)")),
        }
    }
}

/// Per-cell acquisition values aligned with a [`DomainGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionField<T> {
    pub values: Vec<T>,
    pub normalized: bool,
}

impl<T: Scalar> AcquisitionField<T> {
    pub fn raw(values: Vec<T>) -> Self {
        AcquisitionField { values, normalized: false }
    }

    pub fn zeros(n: usize) -> Self {
        AcquisitionField { values: vec![T::zero(); n], normalized: true }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(-T::inf(), |a, b| a.max(b))
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::inf(), |a, b| a.min(b))
    }

    /// Scales into `[0, 1]`. With `shift`, the minimum is first moved to zero
    /// (needed for LSE, whose raw ambiguity can be negative). A constant
    /// field normalizes to all zeros.
    pub fn normalize(mut self, shift: bool) -> Self {
        if self.values.is_empty() {
            self.normalized = true;
            return self;
        }
        if shift {
            let lo = self.min();
            for v in &mut self.values {
                *v -= lo;
            }
        } else {
            for v in &mut self.values {
                *v = v.max(T::zero());
            }
        }
        let hi = self.max();
        if hi > T::zero() && hi.is_finite() {
            for v in &mut self.values {
                *v /= hi;
            }
        } else {
            self.values.iter_mut().for_each(|v| *v = T::zero());
        }
        self.normalized = true;
        self
    }

    /// Index of the largest value, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn value_at(&self, grid: &DomainGrid<T>, p: &Point2<T>) -> T {
        grid.interpolate(&self.values, p)
    }
}

/// Partition of the domain into rectangles with the AAS classification rule
/// `P(f_g > tumor_threshold) > confidence`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionGrid<T> {
    regions: Vec<Rect<T>>,
    nx: usize,
    ny: usize,
    pub tumor_threshold: T,
    pub confidence: T,
}

impl<T: Scalar> RegionGrid<T> {
    /// `nx x ny` equal rectangles over `bounds`, indexed row-major from `ymin`.
    pub fn uniform(bounds: &Rect<T>, nx: usize, ny: usize, tumor_threshold: T, confidence: T) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("regions", "need at least one region per axis"));
        }
        check_confidence(confidence)?;
        let w = bounds.width() / lit(nx as f64);
        let h = bounds.height() / lit(ny as f64);
        let mut regions = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let xmin = bounds.xmin + w * lit(ix as f64);
                let ymin = bounds.ymin + h * lit(iy as f64);
                let xmax = if ix + 1 == nx { bounds.xmax } else { xmin + w };
                let ymax = if iy + 1 == ny { bounds.ymax } else { ymin + h };
                regions.push(Rect { xmin, xmax, ymin, ymax });
            }
        }
        Ok(RegionGrid { regions, nx, ny, tumor_threshold, confidence })
    }

    pub fn regions(&self) -> &[Rect<T>] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn with_threshold(&self, tumor_threshold: T) -> Self {
        RegionGrid { tumor_threshold, ..self.clone() }
    }

    /// Grid cells belonging to each region; errors if any region is empty.
    pub fn assign(&self, grid: &DomainGrid<T>) -> Result<Vec<Vec<usize>>> {
        self.regions
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cells = grid.cells_in(r);
                if cells.is_empty() {
                    Err(Error::EmptyRegion { index: i })
                } else {
                    Ok(cells)
                }
            })
            .collect()
    }
}

fn check_confidence<T: Scalar>(theta: T) -> Result<()> {
    if theta > T::zero() && theta < T::one() {
        Ok(())
    } else {
        Err(invalid("confidence", "must lie strictly between 0 and 1"))
    }
}

/// Mean and variance of a region average `f_g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionPosterior<T> {
    pub mean: T,
    pub variance: T,
}

impl<T: Scalar> RegionPosterior<T> {
    /// `P(f_g > tau)`.
    pub fn prob_above(&self, tau: T) -> T {
        if self.variance > T::zero() {
            norm_cdf((self.mean - tau) / self.variance.sqrt())
        } else if self.mean > tau {
            T::one()
        } else {
            T::zero()
        }
    }
}

/// Posterior quantities over every grid cell, computed once per model and
/// shared by the field routines.
pub struct GridPosterior<'a, T: Scalar> {
    model: &'a GpModel<T>,
    centers: Vec<Point2<T>>,
    /// Columns are `L^-1 k(X, c)` per cell (n x N).
    whitened: DMatrix<T>,
    pub means: Vec<T>,
    pub variances: Vec<T>,
}

impl<'a, T: Scalar> GridPosterior<'a, T> {
    pub fn new(model: &'a GpModel<T>, grid: &DomainGrid<T>) -> Result<Self> {
        let centers = grid.centers();
        let n = model.len();
        let cols: Vec<DVector<T>> = centers.par_iter().map(|c| model.whitened(c)).collect();
        let mut whitened = DMatrix::zeros(n, centers.len());
        for (j, col) in cols.iter().enumerate() {
            whitened.set_column(j, col);
        }
        let preds = model.predict(&centers)?;
        Ok(GridPosterior {
            model,
            centers,
            whitened,
            means: preds.iter().map(|p| p.mean).collect(),
            variances: preds.iter().map(|p| p.variance).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    fn scale2(&self) -> T {
        let s = self.model.output_scale();
        s * s
    }

    /// Posterior covariance between cells `i` and `j` in output units.
    pub fn cov(&self, i: usize, j: usize) -> T {
        let k = self.model.kernel().eval(&self.centers[i], &self.centers[j]);
        let w = self.whitened.column(i).dot(&self.whitened.column(j));
        self.scale2() * (k - w)
    }

    /// Posterior of the uniform average over `cells`.
    pub fn region(&self, cells: &[usize]) -> RegionPosterior<T> {
        let m = lit::<T>(cells.len() as f64);
        let mean = cells.iter().fold(T::zero(), |a, &c| a + self.means[c]) / m;
        let (kbar, wbar) = self.region_moments(cells);
        let var = self.scale2() * (kbar - wbar.norm_squared());
        RegionPosterior { mean, variance: var.max(T::zero()) }
    }

    /// Average prior covariance over the region and the averaged whitened column.
    fn region_moments(&self, cells: &[usize]) -> (T, DVector<T>) {
        let kern = self.model.kernel();
        let mut kbar = T::zero();
        for &a in cells {
            for &b in cells {
                kbar += kern.eval(&self.centers[a], &self.centers[b]);
            }
        }
        let m = lit::<T>(cells.len() as f64);
        kbar /= m * m;
        let mut wbar = DVector::zeros(self.whitened.nrows());
        for &c in cells {
            wbar += self.whitened.column(c);
        }
        wbar /= m;
        (kbar, wbar)
    }
}

/// Posterior of the average of the GP over `region`, via the grid cells it contains.
pub fn region_posterior<T: Scalar>(
    model: &GpModel<T>,
    region: &Rect<T>,
    grid: &DomainGrid<T>,
) -> Result<RegionPosterior<T>> {
    let cells = grid.cells_in(region);
    if cells.is_empty() {
        return Err(Error::EmptyRegion { index: 0 });
    }
    let post = GridPosterior::new(model, grid)?;
    Ok(post.region(&cells))
}

/// Expected number of regions classified as region-of-interest after one
/// more noisy observation at each grid cell.
///
/// For a region with current average posterior `N(m, s^2)` and candidate `x`
/// with predictive observation variance `p = var(x) + sn2` and covariance
/// `c = cov(f_g, f(x))`, the updated region mean is `N(m, c^2/p)` over the
/// unseen outcome and the updated variance is `s'^2 = s^2 - c^2/p`. The
/// region is claimed when `m' > tau + s' z_theta`, giving the reward
/// `Phi((m - tau - s' z_theta) / (|c| / sqrt(p)))`. Regions already claimed
/// under the current data keep their reward of 1.
pub fn aas_field<T: Scalar>(
    model: &GpModel<T>,
    regions: &RegionGrid<T>,
    grid: &DomainGrid<T>,
) -> Result<AcquisitionField<T>> {
    check_confidence(regions.confidence)?;
    let assignment = regions.assign(grid)?;
    let post = GridPosterior::new(model, grid)?;
    Ok(AcquisitionField::raw(aas_values(&post, regions, &assignment)))
}

pub(crate) fn aas_values<T: Scalar>(
    post: &GridPosterior<'_, T>,
    regions: &RegionGrid<T>,
    assignment: &[Vec<usize>],
) -> Vec<T> {
    let tau = regions.tumor_threshold;
    let z_theta = norm_quantile(regions.confidence);
    let scale2 = post.scale2();
    let noise = post.model.noise_variance_out();
    let kern = post.model.kernel();
    let n_cells = post.len();

    struct RegionStats<T: Scalar> {
        mean: T,
        var: T,
        wbar: DVector<T>,
        locked: bool,
    }
    let stats: Vec<RegionStats<T>> = assignment
        .iter()
        .map(|cells| {
            let rp = post.region(cells);
            let (_, wbar) = post.region_moments(cells);
            let locked = rp.prob_above(tau) > regions.confidence;
            RegionStats { mean: rp.mean, var: rp.variance, wbar, locked }
        })
        .collect();

    (0..n_cells)
        .into_par_iter()
        .map(|x| {
            let pv = post.variances[x] + noise;
            let wx = post.whitened.column(x);
            let mut total = T::zero();
            for (cells, st) in assignment.iter().zip(&stats) {
                if st.locked {
                    total += T::one();
                    continue;
                }
                let m = lit::<T>(cells.len() as f64);
                let kbar = cells
                    .iter()
                    .fold(T::zero(), |a, &c| a + kern.eval(&post.centers[c], &post.centers[x]))
                    / m;
                let c = scale2 * (kbar - st.wbar.dot(&wx));
                let rho2 = if pv > T::zero() { c * c / pv } else { T::zero() };
                let s_new = (st.var - rho2).max(T::zero()).sqrt();
                let margin = st.mean - tau - s_new * z_theta;
                let rho = rho2.sqrt();
                let tiny = T::eps() * (st.var.max(T::eps())).sqrt();
                total += if rho > tiny {
                    norm_cdf(margin / rho)
                } else if margin > T::zero() {
                    T::one()
                } else {
                    T::zero()
                };
            }
            total
        })
        .collect()
}

/// How the LSE level `h` is chosen at each update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelRule<T> {
    Fixed(T),
    /// `h = fraction * max posterior mean` over the grid.
    FractionOfMax(T),
}

/// Running confidence region `C_t` per grid point for level-set estimation.
#[derive(Clone, Debug, PartialEq)]
pub struct LseState<T> {
    pub level: LevelRule<T>,
    pub beta: T,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    /// Points whose successive intervals were disjoint and got reset.
    pub resets: usize,
    /// Level used by the latest update.
    pub last_level: T,
}

const LSE_SENTINEL: f64 = 1e30;

impl<T: Scalar> LseState<T> {
    pub fn new(n_points: usize, beta: T, level: LevelRule<T>) -> Result<Self> {
        if !(beta > T::zero()) {
            return Err(invalid("beta", "must be positive"));
        }
        Ok(LseState {
            level,
            beta,
            lo: vec![lit(-LSE_SENTINEL); n_points],
            hi: vec![lit(LSE_SENTINEL); n_points],
            resets: 0,
            last_level: T::zero(),
        })
    }
}

/// Intersects the new confidence intervals into `state` and returns the raw
/// ambiguity `a_t = min(max C_t - h, h - min C_t)`.
pub fn lse_update_and_field<T: Scalar>(
    model: &GpModel<T>,
    state: &mut LseState<T>,
    grid: &DomainGrid<T>,
) -> Result<AcquisitionField<T>> {
    let preds = model.predict(&grid.centers())?;
    if state.lo.len() != preds.len() {
        return Err(Error::DimensionMismatch { expected: state.lo.len(), found: preds.len() });
    }
    let h = match state.level {
        LevelRule::Fixed(h) => h,
        LevelRule::FractionOfMax(frac) => {
            frac * preds.iter().map(|p| p.mean).fold(-T::inf(), |a, b| a.max(b))
        }
    };
    state.last_level = h;
    let root_beta = state.beta.sqrt();
    let mut values = Vec::with_capacity(preds.len());
    for (i, p) in preds.iter().enumerate() {
        let half = root_beta * p.variance.sqrt();
        let (qlo, qhi) = (p.mean - half, p.mean + half);
        let lo = state.lo[i].max(qlo);
        let hi = state.hi[i].min(qhi);
        if lo > hi {
            state.lo[i] = qlo;
            state.hi[i] = qhi;
            state.resets += 1;
        } else {
            state.lo[i] = lo;
            state.hi[i] = hi;
        }
        values.push((state.hi[i] - h).min(h - state.lo[i]));
    }
    Ok(AcquisitionField::raw(values))
}

/// Posterior variance at every grid cell.
pub fn unc_field<T: Scalar>(model: &GpModel<T>, grid: &DomainGrid<T>) -> Result<AcquisitionField<T>> {
    let preds = model.predict(&grid.centers())?;
    Ok(AcquisitionField::raw(preds.iter().map(|p| p.variance).collect()))
}

/// `EI = (mu - y+) Phi(z) + sigma phi(z)` with `z = (mu - y+)/sigma`; zero when `sigma = 0`.
pub fn expected_improvement<T: Scalar>(mean: T, sd: T, incumbent: T) -> T {
    if !(sd > T::zero()) {
        return T::zero();
    }
    let diff = mean - incumbent;
    let z = diff / sd;
    diff * norm_cdf(z) + sd * norm_pdf(z)
}

pub fn ei_field<T: Scalar>(model: &GpModel<T>, grid: &DomainGrid<T>, incumbent: T) -> Result<AcquisitionField<T>> {
    let preds = model.predict(&grid.centers())?;
    Ok(AcquisitionField::raw(
        preds
            .iter()
            .map(|p| expected_improvement(p.mean, p.variance.sqrt(), incumbent))
            .collect(),
    ))
}

/// `label_g = P(f_g > tau) > theta` for every region.
pub fn classify_regions<T: Scalar>(
    model: &GpModel<T>,
    regions: &RegionGrid<T>,
    grid: &DomainGrid<T>,
) -> Result<Vec<bool>> {
    let assignment = regions.assign(grid)?;
    let post = GridPosterior::new(model, grid)?;
    Ok(assignment
        .iter()
        .map(|cells| post.region(cells).prob_above(regions.tumor_threshold) > regions.confidence)
        .collect())
}
