use std::path::Path;
use std::process::{Command, Output};

const FAST: &str = "cem.samples = 60\ncem.max_iters = 8\n";
const OBSTACLES: &str = "obstacle.0 = disc 0.3 0.5 0.1\nobstacle.1 = rect 0.6 0.75 0.2 0.45\nrobot.radius = 0.02\n";

fn palpate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_palpate")).args(args).output().expect("binary runs")
}

fn run_with(dir: &Path, command: &str, config: &str, out: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{out}.cfg"));
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join(out);
    let mut args = vec![command, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    palpate(&args)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn data_rows(text: &str) -> usize {
    text.lines().count() - 1
}

#[test]
fn minimal_discrete_run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_with(tmp.path(), "run-discrete", "search.budget = 6\n", "run", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("run");
    for f in ["probes.csv", "field.csv", "regions.csv", "manifest.txt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert_eq!(data_rows(&read(&out, "probes.csv")), 6);
    assert_eq!(data_rows(&read(&out, "regions.csv")), 64);
    let field = read(&out, "field.csv");
    assert!(field.starts_with("24,24\n0,1,0,1\n"));
    assert_eq!(field.lines().count(), 26);
}

#[test]
fn unknown_method_is_a_config_error_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_with(tmp.path(), "run-discrete", "search.method = FOO\n", "run", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("search.method"));
    assert!(!tmp.path().join("run").exists());

    let o = run_with(tmp.path(), "run-discrete", "gp.lengthscale = -1\n", "neg", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gp"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let o = palpate(&["run-discrete", "--config", "/nonexistent/palpate.cfg", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn discrete_replay_is_byte_identical_and_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "search.budget = 8\nsearch.method = lse\n";
    assert!(run_with(tmp.path(), "run-discrete", cfg, "a", &["--seed", "5"]).status.success());
    assert!(run_with(tmp.path(), "run-discrete", cfg, "b", &["--seed", "5"]).status.success());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for f in ["probes.csv", "field.csv", "regions.csv", "phantom.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let o = palpate(&["validate", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_with(tmp.path(), "run-discrete", "search.budget = 4\n", "a", &[]).status.success());
    let a = tmp.path().join("a");
    let probes = read(&a, "probes.csv").replacen(",1,", ",2,", 1);
    std::fs::write(a.join("probes.csv"), probes + "9,0,0,0,0\n").unwrap();
    let o = palpate(&["validate", a.join("manifest.txt").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("probes.csv"));
}

#[test]
fn continuous_run_with_obstacles_passes_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{OBSTACLES}{FAST}search.budget = 3\n");
    let o = run_with(tmp.path(), "run-continuous", &cfg, "c", &["--seed", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = tmp.path().join("c");
    let traj = read(&c, "trajectory.csv");
    assert!(traj.starts_with("cycle,time,x,y,theta\n"));
    assert!(data_rows(&traj) > 0);
    let times: Vec<f64> = traj.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[1] >= w[0]));
    assert!(data_rows(&read(&c, "ce_trace.csv")) > 0);

    let o = palpate(&["validate", c.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("clear of obstacles"));
}

#[test]
fn validate_rejects_a_trajectory_through_an_obstacle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{OBSTACLES}{FAST}search.budget = 1\n");
    assert!(run_with(tmp.path(), "run-continuous", &cfg, "c", &[]).status.success());
    let c = tmp.path().join("c");
    std::fs::write(c.join("trajectory.csv"), "cycle,time,x,y,theta\n1,0,0.3,0.5,0\n").unwrap();
    let o = palpate(&["validate", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("violate clearance"));
}

#[test]
fn zero_budget_gives_empty_logs_and_valid_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_with(tmp.path(), "run-continuous", "search.budget = 0\n", "z", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let z = tmp.path().join("z");
    for f in ["probes.csv", "trajectory.csv", "ce_trace.csv"] {
        assert_eq!(data_rows(&read(&z, f)), 0, "{f}");
    }
    let manifest = read(&z, "manifest.txt");
    let outputs = manifest.lines().find_map(|l| l.strip_prefix("manifest.outputs = ")).unwrap();
    for f in outputs.split(',') {
        assert!(z.join(f).is_file(), "{f}");
    }
    assert!(palpate(&["validate", z.to_str().unwrap()]).status.success());
}

#[test]
fn same_seed_different_methods_share_the_phantom() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{FAST}search.budget = 2\n");
    assert!(run_with(tmp.path(), "run-continuous", &cfg, "aas", &["--seed", "4", "--method", "aas"]).status.success());
    assert!(run_with(tmp.path(), "run-continuous", &cfg, "unc", &["--seed", "4", "--method", "unc"]).status.success());
    let (a, u) = (tmp.path().join("aas"), tmp.path().join("unc"));
    assert_eq!(read(&a, "phantom.csv"), read(&u, "phantom.csv"));
    assert_ne!(read(&a, "trajectory.csv"), read(&u, "trajectory.csv"));
}

#[test]
fn batch_row_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "run.methods = aas,unc\nsearch.budget = 5\n";
    let o = run_with(tmp.path(), "batch", cfg, "b", &["--runs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b = tmp.path().join("b");
    let curves = read(&b, "recall_curves.csv");
    assert!(curves.starts_with("method,step,mean_recall,sd_recall,n_effective\n"));
    assert_eq!(data_rows(&curves), 10);
    assert!(curves.lines().skip(1).all(|l| l.ends_with(",2")));
    assert_eq!(data_rows(&read(&b, "recall_runs.csv")), 20);
    assert_eq!(data_rows(&read(&b, "failures.csv")), 0);
    assert!(palpate(&["validate", b.to_str().unwrap()]).status.success());
}

#[test]
fn batch_failures_reduce_n_effective() {
    let tmp = tempfile::tempdir().unwrap();
    // a wall over the left half of the start area: runs starting inside it cannot move
    let cfg = format!("run.methods = unc\nsearch.mode = continuous\nsearch.budget = 1\n{FAST}obstacle.0 = rect 0.05 0.5 0.05 0.95\n");
    let o = run_with(tmp.path(), "batch", &cfg, "b", &["--runs", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b = tmp.path().join("b");
    let failed = data_rows(&read(&b, "failures.csv"));
    assert!(failed > 0 && failed < 8, "{failed} of 8 runs failed");
    let curves = read(&b, "recall_curves.csv");
    let n: usize = curves.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(n, 8 - failed);
}

#[test]
fn outputs_are_lf_only_and_no_temp_files_remain() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_with(tmp.path(), "run-discrete", "search.budget = 3\n", "r", &[]).status.success());
    let r = tmp.path().join("r");
    let names: Vec<String> =
        std::fs::read_dir(&r).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(names.len(), 5, "{names:?}");
    for n in names {
        assert!(!read(&r, &n).contains('\r'), "{n}");
    }
}

#[test]
fn gen_phantom_matches_the_run_phantom() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_with(tmp.path(), "gen-phantom", "", "g", &["--seed", "9"]).status.success());
    assert!(run_with(tmp.path(), "run-discrete", "search.budget = 1\n", "r", &["--seed", "9"]).status.success());
    assert_eq!(read(&tmp.path().join("g"), "phantom.csv"), read(&tmp.path().join("r"), "phantom.csv"));
    assert!(palpate(&["validate", tmp.path().join("g").to_str().unwrap()]).status.success());
}

#[test]
fn loaded_phantom_is_used_and_replayed() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_with(tmp.path(), "gen-phantom", "phantom.inclusions = 3\n", "g", &["--seed", "1"]).status.success());
    let file = tmp.path().join("g").join("phantom.csv");
    let cfg = format!("phantom.file = {}\nsearch.budget = 4\n", file.display());
    assert!(run_with(tmp.path(), "run-discrete", &cfg, "r", &[]).status.success());
    let r = tmp.path().join("r");
    assert_eq!(read(&r, "phantom.csv"), std::fs::read_to_string(&file).unwrap());
    assert!(palpate(&["validate", r.to_str().unwrap()]).status.success());
}
