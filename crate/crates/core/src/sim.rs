//! Synthetic phantoms, virtual probing and recall-scored experiments.

use std::fmt::Write as _;

use nalgebra::{Matrix2, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::acquisition::{AcquisitionKind, RegionGrid};
use crate::error::{invalid, Error, Result};
use crate::grid::{DomainGrid, Rect};
use crate::scalar::{lit, to_f64, Scalar};
use crate::search::{classify, continuous_step, discrete_step, SearchConfig, SearchState, StepEvent};
use crate::trajectory::Pose;

/// Isotropic Gaussian inclusion `amplitude * exp(-|x-c|^2 / (2 sd^2))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump<T: Scalar> {
    pub center: Point2<T>,
    pub amplitude: T,
    pub sd: T,
}

impl<T: Scalar> Bump<T> {
    pub fn eval(&self, p: &Point2<T>) -> T {
        let d2 = (p - self.center).norm_squared();
        self.amplitude * (-d2 / (lit::<T>(2.0) * self.sd * self.sd)).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance<T: Scalar> {
    Generated { seed: u64, baseline: T, bumps: Vec<Bump<T>> },
    Loaded,
    Estimated,
}

/// Non-negative stiffness values on the cells of a [`DomainGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct StiffnessField<T: Scalar> {
    grid: DomainGrid<T>,
    values: Vec<T>,
    pub provenance: Provenance<T>,
}

impl<T: Scalar> StiffnessField<T> {
    pub fn new(grid: DomainGrid<T>, values: Vec<T>, provenance: Provenance<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(invalid("stiffness", format!("cell {i} is negative or not finite")));
        }
        Ok(StiffnessField { grid, values, provenance })
    }

    /// Baseline plus bumps sampled at the cell centres.
    pub fn from_bumps(grid: DomainGrid<T>, baseline: T, bumps: Vec<Bump<T>>, seed: u64) -> Result<Self> {
        let values = grid
            .centers()
            .iter()
            .map(|p| bumps.iter().fold(baseline, |a, b| a + b.eval(p)))
            .collect();
        StiffnessField::new(grid, values, Provenance::Generated { seed, baseline, bumps })
    }

    pub fn grid(&self) -> &DomainGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), |a, b| a.max(b))
    }

    /// Bilinear interpolation between cell centres.
    pub fn value_at(&self, p: &Point2<T>) -> T {
        self.grid.interpolate(&self.values, p)
    }

    /// `nx,ny` / `xmin,xmax,ymin,ymax` header, then `ny` rows of `nx` values
    /// starting at `ymin`.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let b = g.bounds();
        let mut out = format!("{},{}\n{},{},{},{}\n", g.nx(), g.ny(), b.xmin, b.xmax, b.ymin, b.ymax);
        for row in self.values.chunks(g.nx()) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse { line: 0, reason: format!("missing {what}") });
        let (l0, dims) = next("dimensions")?;
        let dims: Vec<usize> = parse_row(dims, l0)?;
        let (l1, bounds) = next("bounds")?;
        let bounds: Vec<T> = parse_row::<f64>(bounds, l1)?.into_iter().map(lit).collect();
        if dims.len() != 2 || bounds.len() != 4 {
            return Err(Error::Parse { line: l0 + 1, reason: "expected `nx,ny` then `xmin,xmax,ymin,ymax`".into() });
        }
        let grid = DomainGrid::new(Rect::new(bounds[0], bounds[1], bounds[2], bounds[3])?, dims[0], dims[1])?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..dims[1] {
            let (l, row) = next("field row")?;
            let row: Vec<T> = parse_row::<f64>(row, l)?.into_iter().map(lit).collect();
            if row.len() != dims[0] {
                return Err(Error::Parse { line: l + 1, reason: format!("expected {} values, found {}", dims[0], row.len()) });
            }
            values.extend(row);
        }
        if let Some((l, _)) = lines.next() {
            return Err(Error::Parse { line: l + 1, reason: "unexpected extra row".into() });
        }
        StiffnessField::new(grid, values, Provenance::Loaded)
    }
}

fn parse_row<V: std::str::FromStr>(line: &str, index: usize) -> Result<Vec<V>> {
    line.split(',')
        .map(|s| {
            s.trim()
                .parse::<V>()
                .map_err(|_| Error::Parse { line: index + 1, reason: format!("cannot parse `{}`", s.trim()) })
        })
        .collect()
}

/// Random-phantom generator settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhantomSpec<T> {
    pub baseline: T,
    pub n_inclusions: usize,
    /// Amplitude range as multiples of the baseline.
    pub amplitude: (T, T),
    /// Bump standard-deviation range as fractions of the domain width.
    pub width: (T, T),
}

impl<T: Scalar> Default for PhantomSpec<T> {
    fn default() -> Self {
        PhantomSpec { baseline: T::one(), n_inclusions: 2, amplitude: (lit(3.0), lit(6.0)), width: (lit(0.05), lit(0.12)) }
    }
}

/// Bumps with centres uniform in the inner 80% of the domain; deterministic per seed.
pub fn generate_phantom<T: Scalar>(seed: u64, grid: &DomainGrid<T>, spec: &PhantomSpec<T>) -> Result<StiffnessField<T>> {
    if !(spec.baseline >= T::zero()) || spec.amplitude.0 > spec.amplitude.1 || spec.width.0 > spec.width.1 {
        return Err(invalid("phantom", "need baseline >= 0 and ordered ranges"));
    }
    if !(spec.width.0 > T::zero()) || spec.amplitude.0 < T::zero() {
        return Err(invalid("phantom", "widths must be positive and amplitudes non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inner = grid.bounds().inner(lit(0.8));
    let w = grid.bounds().width();
    let mut uniform = |lo: T, hi: T| lo + lit::<T>(rng.random::<f64>()) * (hi - lo);
    let bumps = (0..spec.n_inclusions)
        .map(|_| {
            let center = Point2::new(uniform(inner.xmin, inner.xmax), uniform(inner.ymin, inner.ymax));
            let amplitude = uniform(spec.amplitude.0, spec.amplitude.1) * spec.baseline;
            let sd = uniform(spec.width.0, spec.width.1) * w;
            Bump { center, amplitude, sd }
        })
        .collect();
    StiffnessField::from_bumps(grid.clone(), spec.baseline, bumps, seed)
}

/// Virtual force-displacement probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeModel<T: Scalar> {
    pub position_noise: Matrix2<T>,
    pub force_noise_sd: T,
    pub displacement_steps: usize,
    pub max_indent: T,
}

impl<T: Scalar> Default for ProbeModel<T> {
    fn default() -> Self {
        ProbeModel {
            position_noise: Matrix2::zeros(),
            force_noise_sd: lit(0.05),
            displacement_steps: 10,
            max_indent: T::one(),
        }
    }
}

impl<T: Scalar> ProbeModel<T> {
    pub fn validate(&self) -> Result<()> {
        if self.displacement_steps < 2 || !(self.max_indent > T::zero()) || !(self.force_noise_sd >= T::zero()) {
            return Err(invalid("probe", "need displacement_steps >= 2, max_indent > 0, force_noise_sd >= 0"));
        }
        let p = &self.position_noise;
        if (p[(0, 1)] - p[(1, 0)]).abs() > T::eps() * lit(64.0) || p[(0, 0)] < T::zero() || p.determinant() < -T::eps() {
            return Err(Error::NotPsd);
        }
        Ok(())
    }

    /// Indentation depths `max_indent * j / steps` for `j = 1..=steps`.
    pub fn displacements(&self) -> Vec<T> {
        let n = lit::<T>(self.displacement_steps as f64);
        (1..=self.displacement_steps).map(|j| self.max_indent * lit(j as f64) / n).collect()
    }

    /// Isotropic position noise with standard deviation `sd`.
    pub fn with_position_sd(mut self, sd: T) -> Self {
        self.position_noise = Matrix2::identity() * (sd * sd);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeReading<T: Scalar> {
    /// Commanded location, which is what the agent believes it probed.
    pub reported: Point2<T>,
    pub contact: Point2<T>,
    pub estimate: T,
}

/// Probes `field` near `x`: the contact point carries Gaussian position
/// error (clamped to the domain) and each force reading Gaussian noise.
pub fn probe<T: Scalar, R: Rng + ?Sized>(
    field: &StiffnessField<T>,
    x: &Point2<T>,
    model: &ProbeModel<T>,
    rng: &mut R,
) -> Result<ProbeReading<T>> {
    let s = &model.position_noise;
    let contact = if s.iter().any(|v| *v != T::zero()) {
        let l = s.cholesky().map(|c| c.unpack()).unwrap_or_else(|| {
            let e = s.symmetric_eigen();
            e.eigenvectors * Matrix2::from_diagonal(&e.eigenvalues.map(|v| v.max(T::zero()).sqrt()))
        });
        let z = nalgebra::Vector2::new(lit::<T>(rng.sample(StandardNormal)), lit::<T>(rng.sample(StandardNormal)));
        field.grid().bounds().clamp(&(x + l * z))
    } else {
        *x
    };
    let k = field.value_at(&contact);
    let d = model.displacements();
    let f: Vec<T> = d
        .iter()
        .map(|&dj| {
            let noise = if model.force_noise_sd > T::zero() {
                model.force_noise_sd * lit::<T>(rng.sample(StandardNormal))
            } else {
                T::zero()
            };
            k * dj + noise
        })
        .collect();
    Ok(ProbeReading { reported: *x, contact, estimate: estimate_stiffness(&d, &f)? })
}

/// Ordinary least-squares slope with intercept.
pub fn estimate_stiffness<T: Scalar>(displacements: &[T], forces: &[T]) -> Result<T> {
    if displacements.len() != forces.len() {
        return Err(Error::DimensionMismatch { expected: displacements.len(), found: forces.len() });
    }
    let n = lit::<T>(displacements.len() as f64);
    if displacements.len() < 2 {
        return Err(Error::DegenerateDisplacements);
    }
    let dm = displacements.iter().fold(T::zero(), |a, &b| a + b) / n;
    let fm = forces.iter().fold(T::zero(), |a, &b| a + b) / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&d, &f) in displacements.iter().zip(forces) {
        sxx += (d - dm) * (d - dm);
        sxy += (d - dm) * (f - fm);
    }
    if !(sxx > T::zero()) {
        return Err(Error::DegenerateDisplacements);
    }
    Ok(sxy / sxx)
}

/// Region labels of the ground truth: average stiffness over `g` above `tau`.
pub fn truth_labels<T: Scalar>(field: &StiffnessField<T>, regions: &RegionGrid<T>, tau: T) -> Result<Vec<bool>> {
    let assignment = regions.assign(field.grid())?;
    Ok(assignment
        .iter()
        .map(|cells| {
            let sum = cells.iter().fold(T::zero(), |a, &c| a + field.values[c]);
            sum / lit(cells.len() as f64) > tau
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecallEntry {
    /// Measurements taken when this entry was scored.
    pub measurements: usize,
    pub tp: usize,
    pub fn_: usize,
    pub recall: f64,
}

/// `TP / (TP + FN)`, defined as 1 when there are no positives.
pub fn score_recall(labels: &[bool], truth: &[bool]) -> Result<RecallEntry> {
    if labels.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: labels.len() });
    }
    let tp = labels.iter().zip(truth).filter(|(a, t)| **a && **t).count();
    let fn_ = labels.iter().zip(truth).filter(|(a, t)| !**a && **t).count();
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    Ok(RecallEntry { measurements: 0, tp, fn_, recall })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecallReport {
    pub seed: u64,
    pub steps: Vec<RecallEntry>,
}

impl RecallReport {
    pub fn final_recall(&self) -> Option<f64> {
        self.steps.last().map(|e| e.recall)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    Discrete,
    Continuous,
}

/// Which ground truth each run of a batch sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhantomProtocol {
    /// New random phantom per run seed.
    Fresh,
    /// One phantom for every run; only the start varies.
    Fixed(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig<T: Scalar> {
    pub search: SearchConfig<T>,
    pub mode: SearchMode,
    pub phantom: PhantomSpec<T>,
    pub protocol: PhantomProtocol,
    /// Resolution of the ground-truth grid.
    pub truth_resolution: (usize, usize),
    /// Ground-truth threshold as a fraction of the phantom maximum.
    pub truth_fraction: T,
    pub probe: ProbeModel<T>,
    /// Hand the known position noise to the GP through the corrected kernel.
    pub corrected_kernel: bool,
    /// Continuous mode stops once this many measurements are taken.
    pub max_measurements: Option<usize>,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn new(search: SearchConfig<T>, mode: SearchMode) -> Self {
        ExperimentConfig {
            search,
            mode,
            phantom: PhantomSpec::default(),
            protocol: PhantomProtocol::Fresh,
            truth_resolution: (48, 48),
            truth_fraction: lit(0.5),
            probe: ProbeModel::default(),
            corrected_kernel: false,
            max_measurements: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.probe.validate()?;
        if !(self.truth_fraction > T::zero()) {
            return Err(invalid("truth_fraction", "must be positive"));
        }
        DomainGrid::new(*self.search.grid.bounds(), self.truth_resolution.0, self.truth_resolution.1)?;
        Ok(())
    }
}

/// Independent RNG stream `stream` of run `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const PHANTOM_STREAM: u64 = 1;
const START_STREAM: u64 = 2;
const PROBE_STREAM: u64 = 3;
const SEARCH_STREAM: u64 = 4;

pub struct RunOutcome<T: Scalar> {
    pub phantom: StiffnessField<T>,
    pub state: SearchState<T>,
    pub events: Vec<StepEvent<T>>,
    pub report: RecallReport,
    pub truth: Vec<bool>,
    pub labels: Vec<bool>,
    /// RMSE of the posterior mean against the truth on the truth grid.
    pub rmse: T,
}

fn phantom_for<T: Scalar>(config: &ExperimentConfig<T>, seed: u64) -> Result<StiffnessField<T>> {
    let (nx, ny) = config.truth_resolution;
    let grid = DomainGrid::new(*config.search.grid.bounds(), nx, ny)?;
    let phantom_seed = match config.protocol {
        PhantomProtocol::Fresh => seed,
        PhantomProtocol::Fixed(s) => s,
    };
    let mut rng = stream_rng(phantom_seed, PHANTOM_STREAM);
    generate_phantom(rng.random(), &grid, &config.phantom)
}

/// Phantom that run `seed` of this configuration will see.
pub fn experiment_phantom<T: Scalar>(config: &ExperimentConfig<T>, seed: u64) -> Result<StiffnessField<T>> {
    phantom_for(config, seed)
}

/// One full search against a phantom, scoring recall after every step.
pub fn run_experiment<T: Scalar>(config: &ExperimentConfig<T>, seed: u64) -> Result<RunOutcome<T>> {
    config.validate()?;
    let phantom = phantom_for(config, seed)?;
    run_on_phantom(config, phantom, seed)
}

pub fn run_on_phantom<T: Scalar>(
    config: &ExperimentConfig<T>,
    phantom: StiffnessField<T>,
    seed: u64,
) -> Result<RunOutcome<T>> {
    let mut search = config.search.clone();
    search.input_noise = config.corrected_kernel.then_some(config.probe.position_noise);
    let tau_truth = config.truth_fraction * phantom.max();
    let truth = truth_labels(&phantom, &search.regions, tau_truth)?;

    let bounds = *search.grid.bounds();
    let inner = bounds.inner(lit(0.8));
    let mut start_rng = stream_rng(seed, START_STREAM);
    let mut u = || lit::<T>(start_rng.random::<f64>());
    let start = Pose::new(
        inner.xmin + u() * inner.width(),
        inner.ymin + u() * inner.height(),
        (u() * lit(2.0) - T::one()) * T::pi(),
    );
    let mut state = SearchState::new(&search, start, stream_rng(seed, SEARCH_STREAM).random())?;
    let mut probe_rng = stream_rng(seed, PROBE_STREAM);
    let model = config.probe;
    let mut oracle = |p: &Point2<T>| probe(&phantom, p, &model, &mut probe_rng).map(|r| r.estimate);

    let mut events = Vec::new();
    let mut steps = Vec::new();
    let mut labels = vec![false; truth.len()];
    while state.steps < search.budget {
        if let Some(cap) = config.max_measurements {
            if state.measurements() >= cap {
                break;
            }
        }
        let ev = match config.mode {
            SearchMode::Discrete => discrete_step(&mut state, &search, &mut oracle)?,
            SearchMode::Continuous => continuous_step(&mut state, &search, &mut oracle)?,
        };
        events.push(ev);
        labels = classify(&state, &search)?;
        let mut entry = score_recall(&labels, &truth)?;
        entry.measurements = state.measurements();
        steps.push(entry);
    }

    let rmse = field_rmse(&state, &phantom)?;
    Ok(RunOutcome { phantom, state, events, report: RecallReport { seed, steps }, truth, labels, rmse })
}

fn field_rmse<T: Scalar>(state: &SearchState<T>, truth: &StiffnessField<T>) -> Result<T> {
    let preds = state.gp.predict(&truth.grid().centers())?;
    let n = lit::<T>(preds.len() as f64);
    let sse = preds
        .iter()
        .zip(truth.values())
        .fold(T::zero(), |a, (p, &t)| a + (p.mean - t) * (p.mean - t));
    Ok((sse / n).sqrt())
}

/// Mean and standard deviation of recall at one step across runs.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_recall: f64,
    pub sd_recall: f64,
    pub n_effective: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecallCurve {
    pub kind: AcquisitionKind,
    pub points: Vec<CurvePoint>,
}

impl RecallCurve {
    pub fn final_mean(&self) -> Option<f64> {
        self.points.last().map(|p| p.mean_recall)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub kind: AcquisitionKind,
    pub seed: u64,
    pub result: std::result::Result<RecallReport, String>,
    pub rmse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchReport {
    pub curves: Vec<RecallCurve>,
    pub runs: Vec<RunRecord>,
}

impl BatchReport {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_err()).count()
    }

    pub fn curve(&self, kind: AcquisitionKind) -> Option<&RecallCurve> {
        self.curves.iter().find(|c| c.kind == kind)
    }
}

/// Runs every kind for seeds `seed0 .. seed0 + n_runs` in parallel. Failed
/// runs are kept in `runs` and left out of the curves.
pub fn run_batch<T: Scalar>(
    config: &ExperimentConfig<T>,
    kinds: &[AcquisitionKind],
    n_runs: usize,
    seed0: u64,
) -> Result<BatchReport> {
    if n_runs == 0 {
        return Err(invalid("runs", "need at least one run"));
    }
    config.validate()?;
    let jobs: Vec<(AcquisitionKind, u64)> =
        kinds.iter().flat_map(|&k| (0..n_runs as u64).map(move |i| (k, seed0.wrapping_add(i)))).collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(kind, seed)| {
            let mut cfg = config.clone();
            cfg.search.kind = kind;
            match run_experiment(&cfg, seed) {
                Ok(out) => RunRecord { kind, seed, result: Ok(out.report), rmse: Some(to_f64(out.rmse)) },
                Err(e) => RunRecord { kind, seed, result: Err(e.to_string()), rmse: None },
            }
        })
        .collect();

    let curves = kinds
        .iter()
        .map(|&kind| {
            let ok: Vec<&RecallReport> =
                runs.iter().filter(|r| r.kind == kind).filter_map(|r| r.result.as_ref().ok()).collect();
            RecallCurve { kind, points: aggregate(&ok) }
        })
        .collect();
    Ok(BatchReport { curves, runs })
}

fn aggregate(reports: &[&RecallReport]) -> Vec<CurvePoint> {
    let len = reports.iter().map(|r| r.steps.len()).max().unwrap_or(0);
    (0..len)
        .map(|step| {
            let xs: Vec<f64> = reports.iter().filter_map(|r| r.steps.get(step)).map(|e| e.recall).collect();
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n.max(1) as f64;
            let sd = if n > 1 {
                (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            CurvePoint { step, mean_recall: mean, sd_recall: sd, n_effective: n }
        })
        .collect()
}
