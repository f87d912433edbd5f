//! Discrete and trajectory-optimized continuous palpation loops.
//!
//! Each step builds the total acquisition field from the current GP, then
//! either probes its argmax (discrete) or optimizes a motion-primitive
//! trajectory that maximizes the acquisition collected along the path and
//! executes it, measuring at a fixed stride (continuous).

use nalgebra::{DVector, Matrix2, Point2};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{
    aas_field, classify_regions, ei_field, lse_update_and_field, unc_field, AcquisitionField, AcquisitionKind,
    LevelRule, LseState, RegionGrid,
};
use crate::cem::{optimize, CemConfig, GmmParams, IterationRecord};
use crate::error::{invalid, Error, Result};
use crate::gp::{GpModel, Kernel, TargetScaling};
use crate::grid::{DomainGrid, Rect};
use crate::scalar::{lit, Scalar};
use crate::trajectory::{rollout, Path, Pose, PrimitiveBounds, PrimitiveParams};

/// Static obstacle in domain coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum Obstacle<T: Scalar> {
    Disc { center: Point2<T>, radius: T },
    /// Simple polygon, vertices in either orientation.
    Polygon { vertices: Vec<Point2<T>> },
}

impl<T: Scalar> Obstacle<T> {
    pub fn disc(center: Point2<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(invalid("obstacle", "disc radius must be positive"));
        }
        Ok(Obstacle::Disc { center, radius })
    }

    pub fn polygon(vertices: Vec<Point2<T>>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(invalid("obstacle", "polygon needs at least 3 vertices"));
        }
        let n = vertices.len();
        let twice_area = (0..n).fold(T::zero(), |a, i| {
            let (p, q) = (vertices[i], vertices[(i + 1) % n]);
            a + p.x * q.y - q.x * p.y
        });
        if !(twice_area.abs() > T::eps()) {
            return Err(invalid("obstacle", "polygon has zero area"));
        }
        Ok(Obstacle::Polygon { vertices })
    }

    /// Axis-aligned box as a polygon.
    pub fn rect(r: &Rect<T>) -> Self {
        Obstacle::Polygon {
            vertices: vec![
                Point2::new(r.xmin, r.ymin),
                Point2::new(r.xmax, r.ymin),
                Point2::new(r.xmax, r.ymax),
                Point2::new(r.xmin, r.ymax),
            ],
        }
    }

    /// Euclidean distance to the obstacle boundary, negative inside.
    pub fn signed_distance(&self, p: &Point2<T>) -> T {
        match self {
            Obstacle::Disc { center, radius } => (p - center).norm() - *radius,
            Obstacle::Polygon { vertices } => {
                let n = vertices.len();
                let d = (0..n)
                    .map(|i| segment_distance(p, &vertices[i], &vertices[(i + 1) % n]))
                    .fold(T::inf(), |a, b| a.min(b));
                if point_in_polygon(p, vertices) {
                    -d
                } else {
                    d
                }
            }
        }
    }

    pub fn contains(&self, p: &Point2<T>) -> bool {
        self.signed_distance(p) < T::zero()
    }
}

fn segment_distance<T: Scalar>(p: &Point2<T>, a: &Point2<T>, b: &Point2<T>) -> T {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > T::zero() { ((p - a).dot(&ab) / len2).clamp(T::zero(), T::one()) } else { T::zero() };
    (p - (a + ab * t)).norm()
}

/// Even-odd rule.
fn point_in_polygon<T: Scalar>(p: &Point2<T>, v: &[Point2<T>]) -> bool {
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (a, b) = (v[i], v[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Disc approximation of the area the robot occupies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotFootprint<T> {
    pub radius: T,
}

impl<T: Scalar> RobotFootprint<T> {
    pub fn new(radius: T) -> Result<Self> {
        if !(radius >= T::zero()) {
            return Err(invalid("footprint", "radius must be non-negative"));
        }
        Ok(RobotFootprint { radius })
    }

    pub fn point() -> Self {
        RobotFootprint { radius: T::zero() }
    }
}

/// Smallest clearance between the swept footprint and any obstacle.
///
/// Returns `T::inf()` when nothing is nearby and the footprint stays inside
/// `domain`. A footprint that crosses the domain edge counts as a collision
/// with an implicit obstacle, its depth measured like any other.
pub fn prox_constraint<T: Scalar>(
    path: &Path<T>,
    obstacles: &[Obstacle<T>],
    footprint: &RobotFootprint<T>,
    domain: &Rect<T>,
) -> T {
    let mut best = T::inf();
    for q in &path.poses {
        let p = q.position();
        for o in obstacles {
            best = best.min(o.signed_distance(&p) - footprint.radius);
        }
        let margin = domain.signed_distance(&p) - footprint.radius;
        if margin < T::zero() {
            best = best.min(margin);
        }
    }
    best
}

/// `alpha(t) = 2^(-t / halflife)`.
pub fn prior_weight<T: Scalar>(t: T, halflife: T) -> T {
    lit::<T>(2.0).powf(-t / halflife)
}

/// How the agent's region threshold tau is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdRule<T> {
    Fixed(T),
    /// `tau = fraction * max posterior mean` over the grid.
    FractionOfMaxMean(T),
}

/// Motion-primitive parameterization for continuous search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionConfig<T> {
    pub n_primitives: usize,
    pub tau: T,
    /// Rollout sampling step as a fraction of `tau`.
    pub dt_fraction: T,
    pub bounds: PrimitiveBounds<T>,
}

impl<T: Scalar> MotionConfig<T> {
    /// Six primitives whose straight run at full speed spans 15% of the
    /// domain diagonal, turning at most a quarter turn per primitive.
    pub fn for_domain(domain: &Rect<T>) -> Self {
        let n = 6usize;
        let v_max = domain.width().max(domain.height());
        let tau = domain.diagonal() * lit(0.15) / (v_max * lit(n as f64));
        let w_max = T::frac_pi_2() / tau;
        MotionConfig {
            n_primitives: n,
            tau,
            dt_fraction: lit(0.05),
            bounds: PrimitiveBounds { v_min: T::zero(), v_max, w_min: -w_max, w_max },
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.n_primitives
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_primitives == 0 || !(self.tau > T::zero()) {
            return Err(invalid("motion", "need n_primitives >= 1 and tau > 0"));
        }
        if !(self.dt_fraction > T::zero() && self.dt_fraction <= T::one()) {
            return Err(invalid("motion", "dt_fraction must lie in (0, 1]"));
        }
        PrimitiveBounds::new(self.bounds.v_min, self.bounds.v_max, self.bounds.w_min, self.bounds.w_max)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig<T: Scalar> {
    pub grid: DomainGrid<T>,
    pub kernel: Kernel<T>,
    pub scaling: TargetScaling,
    pub kind: AcquisitionKind,
    /// Region partition and confidence used by AAS and for labels; its
    /// threshold is replaced by `threshold` at every step.
    pub regions: RegionGrid<T>,
    pub threshold: ThresholdRule<T>,
    pub lse_beta: T,
    pub lse_level: LevelRule<T>,
    /// Normalized prior over tumor locations, one value per grid cell.
    pub prior_field: Option<AcquisitionField<T>>,
    pub decay_halflife: T,
    pub obstacles: Vec<Obstacle<T>>,
    pub footprint: RobotFootprint<T>,
    /// Probes (discrete) or trajectory cycles (continuous).
    pub budget: usize,
    pub measurement_stride: usize,
    pub motion: MotionConfig<T>,
    pub cem: CemConfig<T>,
    /// Known probe-position covariance passed to the corrected kernel.
    pub input_noise: Option<Matrix2<T>>,
}

impl<T: Scalar> SearchConfig<T> {
    /// Defaults over `domain`: 24x24 grid, 8x8 regions, lengthscale 0.1 of
    /// the domain width.
    pub fn new(domain: Rect<T>, kind: AcquisitionKind) -> Result<Self> {
        let grid = DomainGrid::new(domain, 24, 24)?;
        Ok(SearchConfig {
            kernel: Kernel::new(domain.width() * lit(0.1), T::one(), lit(0.01))?,
            scaling: TargetScaling::Standardize,
            kind,
            regions: RegionGrid::uniform(&domain, 8, 8, T::zero(), lit(0.8))?,
            threshold: ThresholdRule::FractionOfMaxMean(lit(0.5)),
            lse_beta: lit(9.0),
            lse_level: LevelRule::FractionOfMax(lit(0.6)),
            prior_field: None,
            decay_halflife: lit(10.0),
            obstacles: Vec::new(),
            footprint: RobotFootprint::point(),
            budget: 30,
            measurement_stride: 4,
            motion: MotionConfig::for_domain(&domain),
            cem: CemConfig::default(),
            input_noise: None,
            grid,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.measurement_stride == 0 {
            return Err(invalid("measurement_stride", "must be at least 1"));
        }
        if !(self.decay_halflife > T::zero()) {
            return Err(invalid("decay_halflife", "must be positive"));
        }
        if let Some(p) = &self.prior_field {
            if p.len() != self.grid.len() {
                return Err(Error::DimensionMismatch { expected: self.grid.len(), found: p.len() });
            }
            let mx = p.max();
            if p.values.iter().any(|v| *v < T::zero()) || (mx - T::one()).abs() > lit(1e-9) && mx != T::zero() {
                return Err(invalid("prior_field", "must be normalized to max 1"));
            }
        }
        self.motion.validate()?;
        self.cem.validate()?;
        self.regions.assign(&self.grid)?;
        Ok(())
    }
}

/// Source of stiffness measurements.
pub trait ProbeOracle<T: Scalar> {
    fn measure(&mut self, at: &Point2<T>) -> Result<T>;
}

impl<T: Scalar, F: FnMut(&Point2<T>) -> Result<T>> ProbeOracle<T> for F {
    fn measure(&mut self, at: &Point2<T>) -> Result<T> {
        self(at)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics<T> {
    pub constraint_violations: usize,
    pub cycle_best_costs: Vec<T>,
    pub lse_resets: usize,
    pub tau_retries: usize,
    pub escapes: usize,
}

impl<T> Default for Diagnostics<T> {
    fn default() -> Self {
        Diagnostics { constraint_violations: 0, cycle_best_costs: Vec::new(), lse_resets: 0, tau_retries: 0, escapes: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct SearchState<T: Scalar> {
    pub gp: GpModel<T>,
    pub lse: Option<LseState<T>>,
    probed: Vec<(Point2<T>, T)>,
    pub pose: Pose<T>,
    /// Completed probes (discrete) or cycles (continuous).
    pub steps: usize,
    pub elapsed_time: T,
    pub diagnostics: Diagnostics<T>,
    pub last_best: Option<Vec<T>>,
    rng: ChaCha8Rng,
}

/// What one step did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepEvent<T: Scalar> {
    pub step: usize,
    pub probes: Vec<(Point2<T>, T)>,
    pub path: Option<Path<T>>,
    pub ce_trace: Vec<IterationRecord<T>>,
    pub best_cost: Option<T>,
}

impl<T: Scalar> SearchState<T> {
    pub fn new(config: &SearchConfig<T>, start: Pose<T>, seed: u64) -> Result<Self> {
        config.validate()?;
        let lse = match config.kind {
            AcquisitionKind::Lse => Some(LseState::new(config.grid.len(), config.lse_beta, config.lse_level)?),
            _ => None,
        };
        Ok(SearchState {
            gp: GpModel::prior(config.kernel),
            lse,
            probed: Vec::new(),
            pose: start,
            steps: 0,
            elapsed_time: T::zero(),
            diagnostics: Diagnostics::default(),
            last_best: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn probed(&self) -> &[(Point2<T>, T)] {
        &self.probed
    }

    pub fn measurements(&self) -> usize {
        self.probed.len()
    }

    fn append(&mut self, config: &SearchConfig<T>, new: &[(Point2<T>, T)]) -> Result<()> {
        self.probed.extend_from_slice(new);
        let points: Vec<Point2<T>> = self.probed.iter().map(|p| p.0).collect();
        let targets: Vec<T> = self.probed.iter().map(|p| p.1).collect();
        let noise = config.input_noise.map(|s| vec![s; points.len()]);
        self.gp = GpModel::fit(config.kernel, &points, &targets, noise.as_deref(), config.scaling)?;
        Ok(())
    }
}

/// The agent's current region threshold.
pub fn agent_threshold<T: Scalar>(state: &SearchState<T>, config: &SearchConfig<T>) -> Result<T> {
    match config.threshold {
        ThresholdRule::Fixed(t) => Ok(t),
        ThresholdRule::FractionOfMaxMean(f) => {
            let preds = state.gp.predict(&config.grid.centers())?;
            Ok(f * preds.iter().map(|p| p.mean).fold(-T::inf(), |a, b| a.max(b)))
        }
    }
}

/// Region labels under the agent's current threshold.
pub fn classify<T: Scalar>(state: &SearchState<T>, config: &SearchConfig<T>) -> Result<Vec<bool>> {
    let regions = config.regions.with_threshold(agent_threshold(state, config)?);
    classify_regions(&state.gp, &regions, &config.grid)
}

/// Normalized acquisition field of the configured kind. Advances the LSE
/// confidence region when LSE is selected.
pub fn acquisition<T: Scalar>(state: &mut SearchState<T>, config: &SearchConfig<T>) -> Result<AcquisitionField<T>> {
    let grid = &config.grid;
    let field = match config.kind {
        AcquisitionKind::Aas => {
            let regions = config.regions.with_threshold(agent_threshold(state, config)?);
            aas_field(&state.gp, &regions, grid)?.normalize(false)
        }
        AcquisitionKind::Lse => {
            let lse = state.lse.get_or_insert(LseState::new(grid.len(), config.lse_beta, config.lse_level)?);
            let f = lse_update_and_field(&state.gp, lse, grid)?;
            state.diagnostics.lse_resets = lse.resets;
            f.normalize(true)
        }
        AcquisitionKind::Unc => unc_field(&state.gp, grid)?.normalize(false),
        AcquisitionKind::Ei => {
            let incumbent = state.gp.targets().iter().copied().fold(-T::inf(), |a, b| a.max(b));
            let incumbent = if incumbent.is_finite() { incumbent } else { T::zero() };
            ei_field(&state.gp, grid, incumbent)?.normalize(false)
        }
    };
    Ok(field)
}

/// `xi_total = eta (xi_acq + alpha(t) xi_prior)`, renormalized to max 1.
/// Without a prior the input is returned unchanged.
pub fn total_acquisition<T: Scalar>(acq: AcquisitionField<T>, config: &SearchConfig<T>, t: T) -> AcquisitionField<T> {
    match &config.prior_field {
        None => acq,
        Some(prior) => {
            let a = prior_weight(t, config.decay_halflife);
            let values = acq.values.iter().zip(&prior.values).map(|(&x, &p)| x + a * p).collect();
            AcquisitionField::raw(values).normalize(false)
        }
    }
}

/// `J(z) = -integral of xi_total along the path`, by the trapezoid rule in
/// arc length. Infinite when the path violates the prox constraint.
pub fn trajectory_cost<T: Scalar>(
    params: &PrimitiveParams<T>,
    q0: &Pose<T>,
    field: &AcquisitionField<T>,
    config: &SearchConfig<T>,
) -> T {
    let params = params.clamp();
    let dt = params.tau * config.motion.dt_fraction;
    let Ok(path) = rollout(q0, &params, dt) else { return T::inf() };
    if prox_constraint(&path, &config.obstacles, &config.footprint, config.grid.bounds()) < T::zero() {
        return T::inf();
    }
    path_integral(&path, &params, field, &config.grid)
}

fn path_integral<T: Scalar>(
    path: &Path<T>,
    params: &PrimitiveParams<T>,
    field: &AcquisitionField<T>,
    grid: &DomainGrid<T>,
) -> T {
    let vals: Vec<T> = path.poses.iter().map(|q| field.value_at(grid, &q.position())).collect();
    let half = lit::<T>(0.5);
    let last = params.len() - 1;
    let mut total = T::zero();
    for i in 0..path.len() - 1 {
        let (t0, t1) = (path.times[i], path.times[i + 1]);
        let seg = crate::scalar::to_f64((t0 + t1) * half / params.tau).floor().max(0.0) as usize;
        let speed = params.pairs[seg.min(last)].0.abs();
        total += half * (vals[i] + vals[i + 1]) * speed * (t1 - t0);
    }
    -total
}

/// Discrete search step: one probe at the argmax of the total acquisition, or at a
/// uniformly random point for the very first probe.
pub fn discrete_step<T: Scalar, O: ProbeOracle<T>>(
    state: &mut SearchState<T>,
    config: &SearchConfig<T>,
    oracle: &mut O,
) -> Result<StepEvent<T>> {
    if state.steps >= config.budget {
        return Err(Error::BudgetExhausted);
    }
    let b = config.grid.bounds();
    let at = if state.probed.is_empty() {
        let x = b.xmin + lit::<T>(state.rng.random::<f64>()) * b.width();
        let y = b.ymin + lit::<T>(state.rng.random::<f64>()) * b.height();
        Point2::new(x, y)
    } else {
        let acq = acquisition(state, config)?;
        let total = total_acquisition(acq, config, lit(state.measurements() as f64));
        config.grid.center(total.argmax())
    };
    let y = oracle.measure(&at)?;
    state.append(config, &[(at, y)])?;
    state.pose = Pose::new(at.x, at.y, state.pose.theta);
    state.steps += 1;
    Ok(StepEvent { step: state.steps - 1, probes: vec![(at, y)], path: None, ce_trace: Vec::new(), best_cost: None })
}

/// Continuous search step: optimize a trajectory from the current pose, execute it and
/// measure every `measurement_stride`-th rollout sample.
///
/// With no data and no prior the field carries no information, so the first
/// cycle executes a random feasible trajectory instead.
pub fn continuous_step<T: Scalar, O: ProbeOracle<T>>(
    state: &mut SearchState<T>,
    config: &SearchConfig<T>,
    oracle: &mut O,
) -> Result<StepEvent<T>> {
    if state.steps >= config.budget {
        return Err(Error::BudgetExhausted);
    }
    let uninformed = state.probed.is_empty() && config.prior_field.is_none();
    let (params, trace, best_cost) = if uninformed {
        match random_feasible(state, config) {
            Err(Error::NoFeasibleSamples) => {
                state.diagnostics.escapes += 1;
                (turn_in_place(state, config)?, Vec::new(), None)
            }
            r => (r?, Vec::new(), None),
        }
    } else {
        let acq = acquisition(state, config)?;
        let field = total_acquisition(acq, config, lit(state.measurements() as f64));
        match plan(state, config, &field, config.motion.tau) {
            Ok(r) => r,
            Err(Error::NoFeasibleSamples) => {
                state.diagnostics.tau_retries += 1;
                state.last_best = None;
                match plan(state, config, &field, config.motion.tau / lit(2.0)) {
                    Err(Error::NoFeasibleSamples) => {
                        state.diagnostics.escapes += 1;
                        (turn_in_place(state, config)?, Vec::new(), None)
                    }
                    r => r?,
                }
            }
            Err(e) => return Err(e),
        }
    };

    let dt = params.tau * config.motion.dt_fraction;
    let path = rollout(&state.pose, &params, dt)?;
    if prox_constraint(&path, &config.obstacles, &config.footprint, config.grid.bounds()) < T::zero() {
        state.diagnostics.constraint_violations += 1;
        return Err(invalid("trajectory", "executed path violates the prox constraint"));
    }
    let stride = config.measurement_stride;
    let mut probes = Vec::new();
    for (i, q) in path.poses.iter().enumerate() {
        if (i + 1) % stride == 0 {
            let p = q.position();
            probes.push((p, oracle.measure(&p)?));
        }
    }
    state.append(config, &probes)?;
    state.pose = *path.end().expect("rollout has poses");
    state.elapsed_time += params.duration();
    if let Some(c) = best_cost {
        state.diagnostics.cycle_best_costs.push(c);
    }
    state.steps += 1;
    Ok(StepEvent { step: state.steps - 1, probes, path: Some(path), ce_trace: trace, best_cost })
}

type Plan<T> = (PrimitiveParams<T>, Vec<IterationRecord<T>>, Option<T>);

fn plan<T: Scalar>(
    state: &mut SearchState<T>,
    config: &SearchConfig<T>,
    field: &AcquisitionField<T>,
    tau: T,
) -> Result<Plan<T>> {
    let m = config.motion;
    let b = m.bounds;
    let mid = DVector::from_iterator(
        m.dim(),
        (0..m.n_primitives).flat_map(|_| [(b.v_min + b.v_max) / lit(2.0), (b.w_min + b.w_max) / lit(2.0)]),
    );
    let mean = match &state.last_best {
        Some(z) if z.len() == m.dim() => DVector::from_column_slice(z),
        _ => mid,
    };
    let floor = config.cem.min_covariance_floor;
    let var: Vec<T> = (0..m.n_primitives)
        .flat_map(|_| [b.v_max - b.v_min, b.w_max - b.w_min])
        .map(|r| (r / lit(2.0)) * (r / lit(2.0)) + floor)
        .collect();
    let gmm0 = GmmParams::diagonal(mean, &var)?;
    let cem = CemConfig { seed: state.rng.next_u64(), ..config.cem.clone() };
    let q0 = state.pose;
    let cost = |z: &[T]| match PrimitiveParams::from_flat(z, tau, b) {
        Ok(p) => trajectory_cost(&p, &q0, field, config),
        Err(_) => T::inf(),
    };
    let out = optimize(cost, gmm0, &cem)?;
    let params = PrimitiveParams::from_flat(out.best.as_slice(), tau, b)?;
    state.last_best = Some(params.to_flat());
    Ok((params, out.trace, Some(out.best_cost)))
}

/// Stationary primitives that turn the robot toward the domain center, for
/// poses where every sampled trajectory leaves the feasible set.
fn turn_in_place<T: Scalar>(state: &SearchState<T>, config: &SearchConfig<T>) -> Result<PrimitiveParams<T>> {
    let m = config.motion;
    let b = m.bounds;
    if b.v_min > T::zero() {
        return Err(Error::NoFeasibleSamples);
    }
    let c = config.grid.bounds().center();
    let q = state.pose;
    let target = (c.y - q.y).atan2(c.x - q.x);
    let mut remaining = (target - q.theta).sin().atan2((target - q.theta).cos());
    let pairs = (0..m.n_primitives)
        .map(|_| {
            let w = (remaining / m.tau).clamp(b.w_min, b.w_max);
            remaining -= w * m.tau;
            (b.v_min, w)
        })
        .collect();
    let params = PrimitiveParams::new(pairs, m.tau, b)?;
    let path = rollout(&q, &params, m.tau * m.dt_fraction)?;
    if prox_constraint(&path, &config.obstacles, &config.footprint, config.grid.bounds()) < T::zero() {
        return Err(Error::NoFeasibleSamples);
    }
    Ok(params)
}

fn random_feasible<T: Scalar>(state: &mut SearchState<T>, config: &SearchConfig<T>) -> Result<PrimitiveParams<T>> {
    let m = config.motion;
    let b = m.bounds;
    let dt = m.tau * m.dt_fraction;
    for _ in 0..1000 {
        let pairs = (0..m.n_primitives)
            .map(|_| {
                let u: f64 = state.rng.random();
                let v: f64 = state.rng.random();
                (b.v_min + lit::<T>(u) * (b.v_max - b.v_min), b.w_min + lit::<T>(v) * (b.w_max - b.w_min))
            })
            .collect();
        let params = PrimitiveParams::new(pairs, m.tau, b)?;
        let path = rollout(&state.pose, &params, dt)?;
        if prox_constraint(&path, &config.obstacles, &config.footprint, config.grid.bounds()) >= T::zero() {
            return Ok(params);
        }
    }
    Err(Error::NoFeasibleSamples)
}
