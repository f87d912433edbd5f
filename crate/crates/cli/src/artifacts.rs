//! CSV rendering, atomic file output and run manifests.
//!
//! Numbers use Rust's shortest round-trip formatting, so every CSV is
//! locale-independent and reparses to the exact values written.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use palpate::grid::DomainGrid;
use palpate::search::{Obstacle, RobotFootprint};
use palpate::sim::{BatchReport, Provenance, RunOutcome, StiffnessField};
use palpate::trajectory::{Path as PosePath, Pose};
use palpate::Rect;

use crate::error::CliError;

/// File name and contents of one output.
pub type Artifact = (&'static str, String);

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(dir.join(name)).map_err(|e| CliError::io(dir.join(name), e.error))?;
    Ok(())
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace(['\n', '\r'], " "))
    } else {
        s.to_string()
    }
}

pub fn probes_csv(out: &RunOutcome<f64>) -> String {
    let mut s = String::from("step,x,y,stiffness_estimate,recall\n");
    for (ev, entry) in out.events.iter().zip(&out.report.steps) {
        for (p, y) in &ev.probes {
            let _ = writeln!(s, "{},{},{},{},{}", ev.step + 1, p.x, p.y, y, entry.recall);
        }
    }
    s
}

/// Posterior mean on the search grid in the field CSV format. The mean is
/// clipped at zero since stiffness is non-negative.
pub fn estimated_field(out: &RunOutcome<f64>, grid: &DomainGrid<f64>) -> Result<StiffnessField<f64>, CliError> {
    let means = out.state.gp.predict(&grid.centers())?.iter().map(|p| p.mean.max(0.0)).collect();
    Ok(StiffnessField::new(grid.clone(), means, Provenance::Estimated)?)
}

pub fn regions_csv(out: &RunOutcome<f64>, regions: &[Rect<f64>]) -> String {
    let mut s = String::from("region,xmin,xmax,ymin,ymax,estimated,truth\n");
    for (g, r) in regions.iter().enumerate() {
        let (e, t) = (out.labels[g] as u8, out.truth[g] as u8);
        let _ = writeln!(s, "{g},{},{},{},{},{e},{t}", r.xmin, r.xmax, r.ymin, r.ymax);
    }
    s
}

pub const TRAJECTORY_HEADER: &str = "cycle,time,x,y,theta";

pub fn trajectory_csv(out: &RunOutcome<f64>) -> String {
    let mut s = format!("{TRAJECTORY_HEADER}\n");
    let mut offset = 0.0;
    for ev in &out.events {
        let Some(path) = &ev.path else { continue };
        for (q, t) in path.poses.iter().zip(&path.times) {
            let _ = writeln!(s, "{},{},{},{},{}", ev.step + 1, offset + t, q.x, q.y, q.theta);
        }
        offset += path.times.last().copied().unwrap_or(0.0);
    }
    s
}

pub fn ce_trace_csv(out: &RunOutcome<f64>) -> String {
    let mut s = String::from("cycle,iteration,best_cost\n");
    for ev in &out.events {
        for rec in &ev.ce_trace {
            let _ = writeln!(s, "{},{},{}", ev.step + 1, rec.iteration, rec.best_cost);
        }
    }
    s
}

pub fn curves_csv(report: &BatchReport) -> String {
    let mut s = String::from("method,step,mean_recall,sd_recall,n_effective\n");
    for c in &report.curves {
        for p in &c.points {
            let _ = writeln!(s, "{},{},{},{},{}", c.kind, p.step + 1, p.mean_recall, p.sd_recall, p.n_effective);
        }
    }
    s
}

/// One row per method, seed and step of every successful run.
pub fn runs_csv(report: &BatchReport) -> String {
    let mut s = String::from("method,seed,step,measurements,tp,fn,recall\n");
    for r in &report.runs {
        if let Ok(rep) = &r.result {
            for (i, e) in rep.steps.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{},{},{},{}", r.kind, r.seed, i + 1, e.measurements, e.tp, e.fn_, e.recall);
            }
        }
    }
    s
}

pub fn failures_csv(report: &BatchReport) -> String {
    let mut s = String::from("method,seed,error\n");
    for r in &report.runs {
        if let Err(e) = &r.result {
            let _ = writeln!(s, "{},{},{}", r.kind, r.seed, quote(e));
        }
    }
    s
}

/// Poses of a trajectory log, in file order.
pub fn parse_trajectory(text: &str) -> Result<PosePath<f64>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(TRAJECTORY_HEADER) {
        return Err(CliError::Validation("trajectory.csv has an unexpected header".into()));
    }
    let mut path = PosePath { poses: Vec::new(), times: Vec::new() };
    for (i, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Validation(format!("trajectory.csv line {}: {e}", i + 2)))?;
        if v.len() != 5 {
            return Err(CliError::Validation(format!("trajectory.csv line {}: expected 5 columns", i + 2)));
        }
        path.times.push(v[1]);
        path.poses.push(Pose::new(v[2], v[3], v[4]));
    }
    Ok(path)
}

/// Poses whose footprint overlaps an obstacle or leaves the domain.
pub fn violating_poses(
    path: &PosePath<f64>,
    obstacles: &[Obstacle<f64>],
    footprint: &RobotFootprint<f64>,
    domain: &Rect<f64>,
) -> Vec<usize> {
    (0..path.poses.len())
        .filter(|&i| {
            let one = PosePath { poses: vec![path.poses[i]], times: vec![path.times[i]] };
            palpate::search::prox_constraint(&one, obstacles, footprint, domain) < 0.0
        })
        .collect()
}

/// Structured-text record of a run: `manifest.*` metadata and the resolved
/// `config.*` snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seeds: String,
    pub started: u64,
    pub finished: u64,
    pub outputs: Vec<String>,
    pub config: Vec<(String, String)>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::from("# palpate run manifest\n");
        let _ = writeln!(s, "manifest.command = {}", self.command);
        let _ = writeln!(s, "manifest.version = {}", self.version);
        let _ = writeln!(s, "manifest.seeds = {}", self.seeds);
        let _ = writeln!(s, "manifest.started = {}", self.started);
        let _ = writeln!(s, "manifest.finished = {}", self.finished);
        let _ = writeln!(s, "manifest.outputs = {}", self.outputs.join(","));
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut m = Manifest {
            command: String::new(),
            version: String::new(),
            seeds: String::new(),
            started: 0,
            finished: 0,
            outputs: Vec::new(),
            config: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| CliError::config_at(line, i + 1, "expected `key = value`"))?;
            let stamp = |v: &str| v.parse::<u64>().map_err(|e| CliError::config_at(k, i + 1, e.to_string()));
            match k {
                "manifest.command" => m.command = v.to_string(),
                "manifest.version" => m.version = v.to_string(),
                "manifest.seeds" => m.seeds = v.to_string(),
                "manifest.started" => m.started = stamp(v)?,
                "manifest.finished" => m.finished = stamp(v)?,
                "manifest.outputs" => m.outputs = v.split(',').filter(|s| !s.is_empty()).map(String::from).collect(),
                _ => match k.strip_prefix("config.") {
                    Some(key) => m.config.push((key.to_string(), v.to_string())),
                    None => return Err(CliError::config_at(k, i + 1, "unknown manifest key")),
                },
            }
        }
        if m.command.is_empty() {
            return Err(CliError::config("manifest.command", "missing"));
        }
        Ok(m)
    }

    pub fn config_text(&self) -> String {
        self.config.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
