//! Command-line behavior: run directories, exit codes, determinism.

use std::path::Path;

use activegsa::harness::cli::main_with;

const SMALL: &str = r#"
seed = 4

[benchmark]
id = "ishigami"

[design]
initial_count = 8
budget = 3

[strategy]
kind = "GlobalGradVarRed"
site_count = 30

[optimizer]
raw_candidates = 256
refine_starts = 2

[fit]
restarts = 2

[metrics]
dgsm_mc = 512
sobol_mc = 256
test_size = 128
reference_mc = 1024
"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["activegsa"];
    full.extend_from_slice(args);
    main_with(full)
}

fn rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn run_creates_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    assert_eq!(run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "1"]), 0);
    for f in ["config.snapshot.json", "design.csv", "metrics.csv", "summary.csv", "refs/ishigami.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert_eq!(rows(&out.join("design.csv")), 11);
    assert_eq!(rows(&out.join("metrics.csv")), 4);
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    for line in metrics.lines().skip(1) {
        let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(vals.iter().all(|v| v.is_finite()));
    }
    let report = tmp.path().join("report");
    assert_eq!(run(&["report", out.to_str().unwrap(), "--out", report.to_str().unwrap()]), 0);
    assert!(report.join("rmse_dgsm.csv").exists());
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(run(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--jobs", "1"]), 0);
    assert_eq!(run(&["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--jobs", "2"]), 0);
    for f in ["design.csv", "metrics.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    assert_eq!(run(&["run", cfg.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "5"]), 0);
    assert_ne!(std::fs::read(a.join("design.csv")).unwrap(), std::fs::read(c.join("design.csv")).unwrap());
}

#[test]
fn replicate_records_do_not_depend_on_later_replicates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", &SMALL.replace("budget = 3", "budget = 1"));
    let two = tmp.path().join("two");
    let three = tmp.path().join("three");
    assert_eq!(run(&["run", cfg.to_str().unwrap(), "--out", two.to_str().unwrap(), "--replicates", "2"]), 0);
    assert_eq!(run(&["run", cfg.to_str().unwrap(), "--out", three.to_str().unwrap(), "--replicates", "3"]), 0);
    for r in ["rep_000", "rep_001"] {
        assert_eq!(
            std::fs::read(two.join(r).join("metrics.csv")).unwrap(),
            std::fs::read(three.join(r).join("metrics.csv")).unwrap()
        );
    }
}

#[test]
fn usage_and_config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", &SMALL.replace("\"ishigami\"", "\"unknown_fn\""));
    assert_eq!(run(&["run", bad.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]), 2);
    let syntax = write(tmp.path(), "syntax.toml", &SMALL.replace("budget = 3", "budget = = 3"));
    assert_eq!(run(&["run", syntax.to_str().unwrap()]), 2);
    assert_eq!(run(&["run", tmp.path().join("missing.toml").to_str().unwrap()]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["run"]), 2);
    assert_eq!(run(&["refs", "nope", "--out", tmp.path().to_str().unwrap()]), 2);
}

#[test]
fn verify_bounds_reports_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["verify-bounds", "--instances", "6", "--out", tmp.path().to_str().unwrap()]), 0);
    assert_eq!(rows(&tmp.path().join("bounds.csv")), 6);
}

#[test]
fn refs_caches_monte_carlo_references() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["refs", "hartmann4", "ishigami", "--mc", "2048", "--out", tmp.path().to_str().unwrap()]), 0);
    let text = std::fs::read_to_string(tmp.path().join("hartmann4.json")).unwrap();
    assert!(text.contains("monte_carlo"));
    assert!(tmp.path().join("ishigami.json").exists());
}

#[test]
fn failing_simulator_aborts_with_partial_results() {
    let tmp = tempfile::tempdir().unwrap();
    // succeeds for the 8 test points, the 6 initial points and 2 enrichment points
    write(
        tmp.path(),
        "sim.py",
        "import json, os, sys\nx = json.loads(sys.stdin.readline())['x']\nc = os.path.join(os.path.dirname(__file__), 'count')\nn = int(open(c).read()) if os.path.exists(c) else 0\nopen(c, 'w').write(str(n + 1))\nif n >= 16:\n    sys.exit(1)\nprint(json.dumps({'y': x[0] + 2 * x[1] * x[1]}))\n",
    );
    let cfg = write(
        tmp.path(),
        "ext.toml",
        r#"
[benchmark]
id = "external"
command = ["python3", "sim.py"]
timeout_secs = 30

[inputs]
marginals = [{ kind = "uniform", lower = 0.0, upper = 1.0 }, { kind = "normal", mean = 0.5, std = 0.2 }]

[design]
initial_count = 6
budget = 5

[strategy]
kind = "GradMaxVar"

[optimizer]
raw_candidates = 128
refine_starts = 1

[metrics]
test_size = 8
dgsm_mc = 64
sobol_mc = 64
"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
    assert_eq!(rows(&out.join("design.csv")), 8);
    assert_eq!(rows(&out.join("metrics.csv")), 3);
}
