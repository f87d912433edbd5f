//! Command-line driver for palpation search.
//!
//! Every command resolves a flat config file, computes its artifacts in
//! memory, writes each one atomically and finishes with a manifest that is
//! enough to replay the run with `validate`.

pub mod artifacts;
pub mod config;
pub mod error;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use palpate::acquisition::AcquisitionKind;
use palpate::sim::{experiment_phantom, run_batch, run_experiment, run_on_phantom, SearchMode};

use crate::artifacts::{Artifact, Manifest};
pub use crate::config::Settings;
pub use crate::error::CliError;

pub const MANIFEST: &str = "manifest.txt";

#[derive(Parser, Debug)]
#[command(name = "palpate", version, about = "Active search for stiff inclusions by robotic palpation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// One probe per step at the acquisition maximum.
    RunDiscrete(RunArgs),
    /// Cross-entropy planned trajectories with measurements along the way.
    RunContinuous(RunArgs),
    /// Seeded runs of every configured method, aggregated into recall curves.
    Batch(RunArgs),
    /// Replay a manifest and check its CSVs byte for byte.
    Validate {
        /// Manifest file or the directory holding it.
        path: PathBuf,
    },
    /// Write the ground-truth phantom for a seed.
    GenPhantom(RunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub method: Option<AcquisitionKind>,
}

/// Commands that produce artifacts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Job {
    RunDiscrete,
    RunContinuous,
    Batch,
    GenPhantom,
}

impl Job {
    pub fn name(self) -> &'static str {
        match self {
            Job::RunDiscrete => "run-discrete",
            Job::RunContinuous => "run-continuous",
            Job::Batch => "batch",
            Job::GenPhantom => "gen-phantom",
        }
    }

    pub fn from_name(s: &str) -> Option<Job> {
        [Job::RunDiscrete, Job::RunContinuous, Job::Batch, Job::GenPhantom].into_iter().find(|j| j.name() == s)
    }
}

/// Runs a parsed command line and returns the text to print.
pub fn dispatch(cli: Cli) -> Result<String, CliError> {
    let (job, args) = match cli.command {
        Command::RunDiscrete(a) => (Job::RunDiscrete, a),
        Command::RunContinuous(a) => (Job::RunContinuous, a),
        Command::Batch(a) => (Job::Batch, a),
        Command::GenPhantom(a) => (Job::GenPhantom, a),
        Command::Validate { path } => return validate(&path),
    };
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::config("--config", format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let settings = Settings::parse(&text, &overrides(job, &args))?;
    execute(job, &settings, &args.out)
}

fn overrides(job: Job, args: &RunArgs) -> Vec<(&'static str, String)> {
    let mut o = Vec::new();
    match job {
        Job::RunDiscrete => o.push(("search.mode", "discrete".to_string())),
        Job::RunContinuous => o.push(("search.mode", "continuous".to_string())),
        _ => {}
    }
    if let Some(s) = args.seed {
        o.push(("run.seed", s.to_string()));
    }
    if let Some(r) = args.runs {
        o.push(("run.runs", r.to_string()));
    }
    if let Some(m) = args.method {
        o.push((if job == Job::Batch { "run.methods" } else { "search.method" }, m.to_string()));
    }
    o
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Computes `job`, writes its artifacts and manifest into `out`.
pub fn execute(job: Job, settings: &Settings, out: &Path) -> Result<String, CliError> {
    let started = now();
    let (files, summary) = produce(job, settings)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for (name, contents) in &files {
        artifacts::write_atomic(out, name, contents)?;
    }
    let seeds = match job {
        Job::Batch => format!("{}-{}", settings.seed, settings.seed + settings.runs as u64 - 1),
        _ => settings.seed.to_string(),
    };
    let manifest = Manifest {
        command: job.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seeds,
        started,
        finished: now(),
        outputs: files.iter().map(|(n, _)| n.to_string()).collect(),
        config: settings.snapshot.clone(),
    };
    artifacts::write_atomic(out, MANIFEST, &manifest.to_text())?;
    Ok(format!("{summary}\nwrote {} files and {MANIFEST} to {}", files.len(), out.display()))
}

/// Artifacts of `job` in memory plus a one-line summary.
pub fn produce(job: Job, settings: &Settings) -> Result<(Vec<Artifact>, String), CliError> {
    let exp = &settings.experiment;
    match job {
        Job::RunDiscrete | Job::RunContinuous => {
            let outcome = match &settings.phantom {
                Some(f) => run_on_phantom(exp, f.clone(), settings.seed)?,
                None => run_experiment(exp, settings.seed)?,
            };
            let grid = &exp.search.grid;
            let mut files: Vec<Artifact> = vec![
                ("probes.csv", artifacts::probes_csv(&outcome)),
                ("field.csv", artifacts::estimated_field(&outcome, grid)?.to_csv()),
                ("regions.csv", artifacts::regions_csv(&outcome, exp.search.regions.regions())),
                ("phantom.csv", outcome.phantom.to_csv()),
            ];
            if exp.mode == SearchMode::Continuous {
                files.push(("trajectory.csv", artifacts::trajectory_csv(&outcome)));
                files.push(("ce_trace.csv", artifacts::ce_trace_csv(&outcome)));
            }
            let recall = outcome.report.final_recall().map_or("n/a".to_string(), |r| format!("{r:.3}"));
            let summary = format!(
                "{} {}: {} steps, {} measurements, final recall {recall}, rmse {:.4}",
                job.name(),
                exp.search.kind,
                outcome.events.len(),
                outcome.state.measurements(),
                outcome.rmse
            );
            Ok((files, summary))
        }
        Job::Batch => {
            let report = run_batch(exp, &settings.methods, settings.runs, settings.seed)?;
            let files = vec![
                ("recall_curves.csv", artifacts::curves_csv(&report)),
                ("recall_runs.csv", artifacts::runs_csv(&report)),
                ("failures.csv", artifacts::failures_csv(&report)),
            ];
            let finals: Vec<String> = report
                .curves
                .iter()
                .map(|c| format!("{} {}", c.kind, c.final_mean().map_or("n/a".to_string(), |m| format!("{m:.3}"))))
                .collect();
            let summary = format!(
                "batch of {} runs per method, {} failed; final mean recall: {}",
                settings.runs,
                report.failures(),
                finals.join(", ")
            );
            Ok((files, summary))
        }
        Job::GenPhantom => {
            let field = match &settings.phantom {
                Some(f) => f.clone(),
                None => experiment_phantom(exp, settings.seed)?,
            };
            let summary = format!("phantom for seed {}: max stiffness {:.4}", settings.seed, field.max());
            Ok((vec![("phantom.csv", field.to_csv())], summary))
        }
    }
}

/// Replays the manifest at `path` and compares every listed output with a
/// fresh computation. Trajectory logs are also checked against the
/// obstacles and the domain.
pub fn validate(path: &Path) -> Result<String, CliError> {
    let manifest_path = if path.is_dir() { path.join(MANIFEST) } else { path.to_path_buf() };
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
    let manifest = Manifest::parse(&text)?;
    let job = Job::from_name(&manifest.command)
        .ok_or_else(|| CliError::config("manifest.command", format!("unknown command `{}`", manifest.command)))?;
    let settings = Settings::parse(&manifest.config_text(), &[])?;

    let (files, _) = produce(job, &settings)?;
    let mut problems = Vec::new();
    for name in &manifest.outputs {
        let on_disk = match std::fs::read(dir.join(name)) {
            Ok(b) => b,
            Err(e) => {
                problems.push(format!("{name}: {e}"));
                continue;
            }
        };
        match files.iter().find(|(n, _)| n == name) {
            Some((_, fresh)) if fresh.as_bytes() == on_disk.as_slice() => {}
            Some(_) => problems.push(format!("{name}: replay differs")),
            None => problems.push(format!("{name}: not produced by `{}`", manifest.command)),
        }
    }
    for (name, _) in &files {
        if !manifest.outputs.iter().any(|o| o == name) {
            problems.push(format!("{name}: missing from the manifest"));
        }
    }

    let mut checked_poses = 0;
    if manifest.outputs.iter().any(|o| o == "trajectory.csv") {
        let traj_path = dir.join("trajectory.csv");
        let traj = std::fs::read_to_string(&traj_path).map_err(|e| CliError::io(&traj_path, e))?;
        let poses = artifacts::parse_trajectory(&traj)?;
        let s = &settings.experiment.search;
        let bad = artifacts::violating_poses(&poses, &s.obstacles, &s.footprint, s.grid.bounds());
        if let Some(first) = bad.first() {
            problems.push(format!("trajectory.csv: {} poses violate clearance, first at row {}", bad.len(), first + 1));
        }
        checked_poses = poses.poses.len();
    }

    if problems.is_empty() {
        Ok(format!(
            "{}: {} outputs replay byte-identically; {checked_poses} trajectory poses clear of obstacles",
            manifest_path.display(),
            manifest.outputs.len()
        ))
    } else {
        Err(CliError::Validation(problems.join("; ")))
    }
}
