//! Flat `key = value` run configuration.
//!
//! Every key is optional. Lines starting with `#` are comments. Resolving a
//! file records the value used for every key, defaults included, so the
//! snapshot in a manifest replays the run exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Point2;
use palpate::acquisition::{AcquisitionField, AcquisitionKind, LevelRule, RegionGrid};
use palpate::gp::{Kernel, TargetScaling};
use palpate::search::{MotionConfig, Obstacle, RobotFootprint, SearchConfig, ThresholdRule};
use palpate::sim::{ExperimentConfig, PhantomProtocol, PhantomSpec, ProbeModel, SearchMode, StiffnessField};
use palpate::trajectory::PrimitiveBounds;
use palpate::{DomainGrid, Rect};

use crate::error::CliError;

/// A resolved configuration plus the run-level settings around it.
#[derive(Clone, Debug)]
pub struct Settings {
    pub experiment: ExperimentConfig<f64>,
    pub seed: u64,
    pub runs: usize,
    pub methods: Vec<AcquisitionKind>,
    /// Ground truth loaded from a field CSV instead of generated.
    pub phantom: Option<StiffnessField<f64>>,
    /// Resolved `key = value` pairs in resolution order.
    pub snapshot: Vec<(String, String)>,
}

impl Settings {
    /// Parses `text`, with `overrides` taking precedence over its entries.
    pub fn parse(text: &str, overrides: &[(&str, String)]) -> Result<Self, CliError> {
        let mut r = Reader::new(text)?;
        for (k, v) in overrides {
            r.entries.insert(k.to_string(), (0, v.clone()));
        }
        let s = resolve(&mut r)?;
        if let Some((key, (line, _))) = r.entries.iter().next() {
            return Err(CliError::config_at(key, *line, "unknown key"));
        }
        Ok(s)
    }

    /// The snapshot as config file text.
    pub fn to_text(&self) -> String {
        self.snapshot.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

struct Reader {
    entries: BTreeMap<String, (usize, String)>,
    resolved: Vec<(String, String)>,
}

impl Reader {
    fn new(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::config_at(line, i + 1, "expected `key = value`"));
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(CliError::config_at("", i + 1, "empty key"));
            }
            if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(CliError::config_at(&key, i + 1, "duplicate key"));
            }
        }
        Ok(Reader { entries, resolved: Vec::new() })
    }

    fn get<V>(&mut self, key: &str, default: V) -> Result<V, CliError>
    where
        V: FromStr + fmt::Display,
        V::Err: fmt::Display,
    {
        let value = match self.entries.remove(key) {
            Some((line, text)) => text.parse::<V>().map_err(|e| CliError::config_at(key, line, e.to_string()))?,
            None => default,
        };
        self.resolved.push((key.to_string(), value.to_string()));
        Ok(value)
    }

    /// Resolves `key` as an optional file path, recorded in absolute form.
    fn path(&mut self, key: &str) -> Result<Option<PathBuf>, CliError> {
        let Some(p) = self.get(key, Opt::<String>(None))?.0 else {
            return Ok(None);
        };
        let abs = std::fs::canonicalize(&p).map_err(|e| CliError::config(key, format!("{p}: {e}")))?;
        let text = abs.to_str().ok_or_else(|| CliError::config(key, "path is not valid UTF-8"))?;
        self.resolved.last_mut().expect("just resolved").1 = text.to_string();
        Ok(Some(abs))
    }

    fn indexed(&mut self, prefix: &str) -> Result<Vec<String>, CliError> {
        let keys: Vec<String> = self.entries.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        let mut found = Vec::new();
        for k in keys {
            let Ok(i) = k[prefix.len()..].parse::<usize>() else {
                let line = self.entries[&k].0;
                return Err(CliError::config_at(&k, line, "expected a numeric index"));
            };
            found.push((i, k));
        }
        found.sort();
        Ok(found.into_iter().map(|(_, k)| k).collect())
    }
}

/// `none` or a value.
#[derive(Clone, Debug, PartialEq)]
struct Opt<V>(Option<V>);

impl<V: FromStr> FromStr for Opt<V> {
    type Err = V::Err;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("none") {
            Ok(Opt(None))
        } else {
            s.parse().map(|v| Opt(Some(v)))
        }
    }
}

impl<V: fmt::Display> fmt::Display for Opt<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Some(v) => v.fmt(f),
            None => f.write_str("none"),
        }
    }
}

/// `fraction F` (of the maximum posterior mean) or `fixed V`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Rule {
    Fraction(f64),
    Fixed(f64),
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut it = s.split_whitespace();
        let kind = it.next().unwrap_or("");
        let v: f64 = it
            .next()
            .ok_or("expected `fraction F` or `fixed V`")?
            .parse()
            .map_err(|e| format!("bad number: {e}"))?;
        if it.next().is_some() {
            return Err("trailing tokens".into());
        }
        match kind {
            "fraction" => Ok(Rule::Fraction(v)),
            "fixed" => Ok(Rule::Fixed(v)),
            other => Err(format!("unknown rule `{other}` (expected fraction or fixed)")),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Fraction(v) => write!(f, "fraction {v}"),
            Rule::Fixed(v) => write!(f, "fixed {v}"),
        }
    }
}

struct Methods(Vec<AcquisitionKind>);

impl FromStr for Methods {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kinds = s.split(',').map(|m| m.parse()).collect::<Result<Vec<AcquisitionKind>, String>>()?;
        if kinds.is_empty() {
            return Err("need at least one method".into());
        }
        Ok(Methods(kinds))
    }
}

impl fmt::Display for Methods {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|k| k.as_str()).collect();
        f.write_str(&names.join(","))
    }
}

struct Mode(SearchMode);

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "discrete" => Ok(Mode(SearchMode::Discrete)),
            "continuous" => Ok(Mode(SearchMode::Continuous)),
            other => Err(format!("unknown mode `{other}` (expected discrete or continuous)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            SearchMode::Discrete => "discrete",
            SearchMode::Continuous => "continuous",
        })
    }
}

struct Scaling(TargetScaling);

impl FromStr for Scaling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standardize" => Ok(Scaling(TargetScaling::Standardize)),
            "none" => Ok(Scaling(TargetScaling::None)),
            other => Err(format!("unknown scaling `{other}` (expected standardize or none)")),
        }
    }
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            TargetScaling::Standardize => "standardize",
            TargetScaling::None => "none",
        })
    }
}

struct Protocol(PhantomProtocol);

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut it = s.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some("fresh"), None, None) => Ok(Protocol(PhantomProtocol::Fresh)),
            (Some("fixed"), Some(n), None) => {
                n.parse().map(|n| Protocol(PhantomProtocol::Fixed(n))).map_err(|e| format!("bad seed: {e}"))
            }
            _ => Err("expected `fresh` or `fixed SEED`".into()),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            PhantomProtocol::Fresh => f.write_str("fresh"),
            PhantomProtocol::Fixed(n) => write!(f, "fixed {n}"),
        }
    }
}

/// `disc X Y R`, `rect XMIN XMAX YMIN YMAX` or `polygon X1 Y1 X2 Y2 ...`.
struct ObstacleSpec(Obstacle<f64>);

impl FromStr for ObstacleSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut it = s.split_whitespace();
        let kind = it.next().unwrap_or("");
        let nums = it.map(|t| t.parse::<f64>()).collect::<Result<Vec<f64>, _>>().map_err(|e| format!("bad number: {e}"))?;
        let obstacle = match (kind, nums.len()) {
            ("disc", 3) => Obstacle::disc(Point2::new(nums[0], nums[1]), nums[2]),
            ("rect", 4) => Rect::new(nums[0], nums[1], nums[2], nums[3]).map(|r| Obstacle::rect(&r)),
            ("polygon", n) if n >= 6 && n % 2 == 0 => {
                Obstacle::polygon(nums.chunks(2).map(|c| Point2::new(c[0], c[1])).collect())
            }
            _ => return Err("expected `disc X Y R`, `rect XMIN XMAX YMIN YMAX` or `polygon X1 Y1 ...`".into()),
        };
        obstacle.map(ObstacleSpec).map_err(|e| e.to_string())
    }
}

impl fmt::Display for ObstacleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Obstacle::Disc { center, radius } => write!(f, "disc {} {} {}", center.x, center.y, radius),
            Obstacle::Polygon { vertices } => {
                f.write_str("polygon")?;
                for v in vertices {
                    write!(f, " {} {}", v.x, v.y)?;
                }
                Ok(())
            }
        }
    }
}

fn at<V>(key: &str, r: palpate::Result<V>) -> Result<V, CliError> {
    r.map_err(|e| CliError::config(key, e.to_string()))
}

fn resolve(r: &mut Reader) -> Result<Settings, CliError> {
    let seed = r.get("run.seed", 0u64)?;
    let runs = r.get("run.runs", 100usize)?;
    let methods = r.get("run.methods", Methods(AcquisitionKind::ALL.to_vec()))?.0;
    let mode = r.get("search.mode", Mode(SearchMode::Discrete))?.0;
    let kind = r.get("search.method", AcquisitionKind::Aas)?;

    let unit = Rect::unit();
    let domain = at(
        "domain",
        Rect::new(
            r.get("domain.xmin", unit.xmin)?,
            r.get("domain.xmax", unit.xmax)?,
            r.get("domain.ymin", unit.ymin)?,
            r.get("domain.ymax", unit.ymax)?,
        ),
    )?;
    let mut search = at("domain", SearchConfig::new(domain, kind))?;

    let (nx, ny) = (r.get("grid.nx", search.grid.nx())?, r.get("grid.ny", search.grid.ny())?);
    search.grid = at("grid", DomainGrid::new(domain, nx, ny))?;

    let k = search.kernel;
    search.kernel = at(
        "gp",
        Kernel::new(
            r.get("gp.lengthscale", k.lengthscale())?,
            r.get("gp.signal_variance", k.signal_variance())?,
            r.get("gp.noise_variance", k.noise_variance())?,
        ),
    )?;
    search.scaling = r.get("gp.scaling", Scaling(search.scaling))?.0;

    let (rx, ry) = (r.get("regions.nx", search.regions.nx())?, r.get("regions.ny", search.regions.ny())?);
    let confidence = r.get("regions.confidence", search.regions.confidence)?;
    search.regions = at("regions", RegionGrid::uniform(&domain, rx, ry, 0.0, confidence))?;
    let default_threshold = match search.threshold {
        ThresholdRule::Fixed(v) => Rule::Fixed(v),
        ThresholdRule::FractionOfMaxMean(v) => Rule::Fraction(v),
    };
    search.threshold = match r.get("regions.threshold", default_threshold)? {
        Rule::Fixed(v) => ThresholdRule::Fixed(v),
        Rule::Fraction(v) => ThresholdRule::FractionOfMaxMean(v),
    };

    search.lse_beta = r.get("lse.beta", search.lse_beta)?;
    let default_level = match search.lse_level {
        LevelRule::Fixed(v) => Rule::Fixed(v),
        LevelRule::FractionOfMax(v) => Rule::Fraction(v),
    };
    search.lse_level = match r.get("lse.level", default_level)? {
        Rule::Fixed(v) => LevelRule::Fixed(v),
        Rule::Fraction(v) => LevelRule::FractionOfMax(v),
    };

    search.decay_halflife = r.get("prior.halflife", search.decay_halflife)?;
    if let Some(path) = r.path("prior.field")? {
        search.prior_field = Some(load_prior(&path, &search.grid)?);
    }

    search.budget = r.get("search.budget", search.budget)?;
    search.measurement_stride = r.get("search.stride", search.measurement_stride)?;
    let max_measurements = r.get("search.max_measurements", Opt::<usize>(None))?.0;

    search.footprint = at("robot.radius", RobotFootprint::new(r.get("robot.radius", search.footprint.radius)?))?;
    let obstacle_keys = r.indexed("obstacle.")?;
    let mut obstacles = Vec::new();
    for key in obstacle_keys {
        let (line, text) = r.entries.remove(&key).expect("key listed by indexed()");
        let spec: ObstacleSpec = text.parse().map_err(|e: String| CliError::config_at(&key, line, e))?;
        r.resolved.push((format!("obstacle.{}", obstacles.len()), spec.to_string()));
        obstacles.push(spec.0);
    }
    search.obstacles = obstacles;

    let m = MotionConfig::for_domain(&domain);
    let n_primitives = r.get("motion.n_primitives", m.n_primitives)?;
    let tau = r.get("motion.tau", m.tau)?;
    let dt_fraction = r.get("motion.dt_fraction", m.dt_fraction)?;
    let bounds = at(
        "motion",
        PrimitiveBounds::new(
            r.get("motion.v_min", m.bounds.v_min)?,
            r.get("motion.v_max", m.bounds.v_max)?,
            r.get("motion.w_min", m.bounds.w_min)?,
            r.get("motion.w_max", m.bounds.w_max)?,
        ),
    )?;
    search.motion = MotionConfig { n_primitives, tau, dt_fraction, bounds };

    let c = search.cem.clone();
    search.cem.n_samples = r.get("cem.samples", c.n_samples)?;
    search.cem.elite_frac = r.get("cem.elite_frac", c.elite_frac)?;
    search.cem.max_iters = r.get("cem.max_iters", c.max_iters)?;
    search.cem.min_covariance_floor = r.get("cem.covariance_floor", c.min_covariance_floor)?;
    search.cem.convergence_tol = r.get("cem.tolerance", c.convergence_tol)?;
    search.cem.components = r.get("cem.components", c.components)?;
    search.cem.em_iters = r.get("cem.em_iters", c.em_iters)?;
    search.cem.smoothing = r.get("cem.smoothing", c.smoothing)?;

    let mut exp = ExperimentConfig::new(search, mode);
    exp.max_measurements = max_measurements;

    let p = PhantomSpec::<f64>::default();
    exp.phantom = PhantomSpec {
        baseline: r.get("phantom.baseline", p.baseline)?,
        n_inclusions: r.get("phantom.inclusions", p.n_inclusions)?,
        amplitude: (r.get("phantom.amplitude_min", p.amplitude.0)?, r.get("phantom.amplitude_max", p.amplitude.1)?),
        width: (r.get("phantom.width_min", p.width.0)?, r.get("phantom.width_max", p.width.1)?),
    };
    exp.protocol = r.get("phantom.protocol", Protocol(exp.protocol))?.0;
    let phantom = match r.path("phantom.file")? {
        Some(path) => Some(load_field("phantom.file", &path)?),
        None => None,
    };

    exp.truth_resolution = (r.get("truth.nx", exp.truth_resolution.0)?, r.get("truth.ny", exp.truth_resolution.1)?);
    exp.truth_fraction = r.get("truth.fraction", exp.truth_fraction)?;

    let pm = ProbeModel::<f64>::default();
    let position_sd: f64 = r.get("probe.position_sd", 0.0)?;
    if !(position_sd >= 0.0) {
        return Err(CliError::config("probe.position_sd", "must be non-negative"));
    }
    exp.probe = ProbeModel {
        force_noise_sd: r.get("probe.force_sd", pm.force_noise_sd)?,
        displacement_steps: r.get("probe.steps", pm.displacement_steps)?,
        max_indent: r.get("probe.max_indent", pm.max_indent)?,
        ..pm
    }
    .with_position_sd(position_sd);
    exp.corrected_kernel = r.get("probe.corrected_kernel", false)?;

    exp.validate().map_err(|e| CliError::config(key_for(&e), e.to_string()))?;
    if runs == 0 {
        return Err(CliError::config("run.runs", "need at least one run"));
    }
    Ok(Settings { experiment: exp, seed, runs, methods, phantom, snapshot: std::mem::take(&mut r.resolved) })
}

/// Config key behind a core validation error.
fn key_for(e: &palpate::Error) -> &'static str {
    match e {
        palpate::Error::InvalidParameter { name, .. } => match *name {
            "measurement_stride" => "search.stride",
            "decay_halflife" => "prior.halflife",
            "prior_field" => "prior.field",
            "elite_frac" => "cem.elite_frac",
            "smoothing" => "cem.smoothing",
            "truth_fraction" => "truth.fraction",
            "motion" => "motion",
            "cem" => "cem",
            "probe" => "probe",
            _ => "config",
        },
        palpate::Error::EmptyRegion { .. } => "regions",
        palpate::Error::NotPsd => "probe.position_sd",
        _ => "config",
    }
}

fn load_field(key: &str, path: &Path) -> Result<StiffnessField<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(key, format!("{}: {e}", path.display())))?;
    StiffnessField::from_csv(&text).map_err(|e| CliError::config(key, format!("{}: {e}", path.display())))
}

fn load_prior(path: &Path, grid: &DomainGrid<f64>) -> Result<AcquisitionField<f64>, CliError> {
    let field = load_field("prior.field", path)?;
    if field.grid().nx() != grid.nx() || field.grid().ny() != grid.ny() {
        return Err(CliError::config(
            "prior.field",
            format!("field is {}x{}, search grid is {}x{}", field.grid().nx(), field.grid().ny(), grid.nx(), grid.ny()),
        ));
    }
    Ok(AcquisitionField::raw(field.values().to_vec()).normalize(false))
}
