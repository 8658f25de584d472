use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use shang::harness::CSV_HEADER;
use shang::{run_monte_carlo, theorem_bound, Execution, ExperimentSpec, MethodSpec, ProblemSpec};
use tempfile::TempDir;

const SMOKE: &str = r#"
[experiment]
problem = "fd"
exponent = 4
sigma = 10
methods = ["shangpp"]
n_runs = 1
n_iters = 10
x0 = [1.0]
"#;

fn shang(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shang"))
        .args(args)
        .current_dir(dir)
        .env_remove("SHANG_SEED")
        .output()
        .expect("binary runs")
}

fn with_config(toml: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), toml).unwrap();
    dir
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn smoke_bench_writes_ten_rows() {
    let dir = with_config(SMOKE);
    let started = Instant::now();
    let out = shang(&["bench", "--config", "run.toml", "--out", "o", "--quiet"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(started.elapsed().as_secs_f64() < 1.0);
    assert!(out.stdout.is_empty());
    let csv = fs::read_to_string(dir.path().join("o/shangpp_fd4_sigma10.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 11);
}

#[test]
fn bound_column_matches_theorem_bound() {
    let dir = with_config(SMOKE);
    let out = shang(&["bench", "--config", "run.toml", "--out", ".", "--seed", "5", "--quiet"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("shangpp_fd4_sigma10.csv")).unwrap();

    let mut spec = ExperimentSpec::new(ProblemSpec::Fd { exponent: 4 }, MethodSpec::shangpp(1.0));
    spec.sigma = 10.0;
    spec.n_runs = 1;
    spec.n_iters = 10;
    spec.base_seed = 5;
    let stats = run_monte_carlo::<f64>(&spec, Execution::Serial).unwrap();
    let rate = stats.rate.unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let k: usize = cols[0].parse().unwrap();
        let expected = theorem_bound(&rate, k - 1, stats.mean_initial_energy).unwrap();
        assert_eq!(cols[5].parse::<f64>().unwrap().to_bits(), expected.to_bits());
    }
    assert_eq!(csv, stats.to_csv());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = with_config(
        r#"
        seed = 11
        [experiment]
        problem = "quadratic"
        eigenvalues = [0.1, 1.0]
        sigma = [0, 2]
        methods = "all"
        n_runs = 16
        n_iters = 50
        "#,
    );
    let run = |out: &str, jobs: &str| {
        let o = shang(&["bench", "--config", "run.toml", "--out", out, "--jobs", jobs, "--quiet"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    };
    run("a", "1");
    run("b", "4");
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 10);
    for name in names {
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?}");
    }
}

#[test]
fn seed_flag_overrides_config_and_environment() {
    let dir = with_config(&format!("seed = 1\n{}", SMOKE.replace("n_runs = 1", "n_runs = 3")));
    let csv = |out: &str, extra: &[&str], env: Option<&str>| {
        let mut args = vec!["bench", "--config", "run.toml", "--out", out, "--quiet"];
        args.extend_from_slice(extra);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_shang"));
        cmd.args(&args).current_dir(dir.path()).env_remove("SHANG_SEED");
        if let Some(seed) = env {
            cmd.env("SHANG_SEED", seed);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read_to_string(dir.path().join(out).join("shangpp_fd4_sigma10.csv")).unwrap()
    };
    let from_config = csv("c", &[], None);
    let from_env = csv("e", &[], Some("2"));
    let from_flag = csv("f", &["--seed", "2"], Some("1"));
    let flag_equals_config = csv("g", &["--seed", "1"], Some("2"));
    assert_eq!(from_config, from_env);
    assert_ne!(from_config, from_flag);
    assert_eq!(from_config, flag_equals_config);
}

#[test]
fn empty_method_list_is_a_usage_error() {
    let dir = with_config(&SMOKE.replace(r#"methods = ["shangpp"]"#, "methods = []"));
    let out = shang(&["bench", "--config", "run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no methods specified"));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = with_config(&SMOKE.replace("n_runs = 1", "n_runz = 1"));
    let out = shang(&["bench", "--config", "run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("n_runz"), "{}", stderr(&out));
}

#[test]
fn invalid_values_fail_before_any_output() {
    let dir = with_config(&SMOKE.replace("sigma = 10", "sigma = [0, -1]"));
    let out = shang(&["bench", "--config", "run.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_suite_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = shang(&["verify", "foo"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("foo"));
}

#[test]
fn verify_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = shang(&["verify", "snag-equivalence"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("PASS"), "{report}");
    let out = shang(&["verify", "schedules", "--quiet"], dir.path());
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn sweep_with_only_sigma_zero_has_zero_delta() {
    let dir = with_config(
        r#"
        [experiment]
        problem = "quadratic"
        eigenvalues = [0.01, 1.0]
        methods = ["shang", "shangpp"]
        n_runs = 4
        n_iters = 100
        [sweep]
        sigmas = [0]
        tune_sigma = 0.5
        "#,
    );
    let out = shang(&["sweep", "--config", "run.toml", "--out", ".", "--quiet"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    for method in ["shang", "shangpp"] {
        let path = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| p.file_name().unwrap().to_string_lossy().starts_with(&format!("sweep_{method}_")))
            .expect("sweep csv written");
        let csv = fs::read_to_string(path).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].split(',').nth(3).unwrap().parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn sweep_requires_sigma_zero() {
    let dir = with_config(
        r#"
        [experiment]
        problem = "fd"
        exponent = 4
        methods = ["shang"]
        [sweep]
        sigmas = [0.1, 0.5]
        tune_sigma = 0.5
        "#,
    );
    let out = shang(&["sweep", "--config", "run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn nag_with_a_large_step_is_marked_divergent() {
    let dir = with_config(
        r#"
        [experiment]
        problem = "quadratic"
        eigenvalues = [0.01, 1.0]
        methods = ["nag"]
        n_runs = 8
        n_iters = 500
        [nag]
        lr = 1.9
        momentum = 0.9
        [sweep]
        sigmas = [0, 0.5]
        tune_sigma = 0.5
        "#,
    );
    let out = shang(&["sweep", "--config", "run.toml", "--out", "."], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8(out.stdout).unwrap().contains("DIVERGED"));
}
