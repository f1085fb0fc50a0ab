use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"model = "builtin:scalar"
radii = [1.0]

[synthesis]
grid = 256

[approximation]
degree = 2
lp_grid = 1024

[evaluation]
horizon = 16

[simulation]
horizon = 40
trials = 50
replay_block = 8
disturbances = ["white", "worst_case_finite"]
"#;

fn drro(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drro"))
        .current_dir(dir)
        .env_remove("DRRO_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn error_record(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

#[test]
fn pipeline_writes_every_artifact() {
    let dir = setup(SMALL);
    let out = drro(dir.path(), &["pipeline", "--config", "run.toml", "--out", "out"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("out");
    for f in ["config.toml", "resolved.json", "summary.json", "summary.csv"] {
        assert!(root.join(f).is_file(), "{f}");
    }
    for f in [
        "synthesis.json",
        "trace.csv",
        "m_star.csv",
        "n_star.csv",
        "rational.toml",
        "approximation.json",
        "controller.toml",
        "closed_loop.json",
        "evaluation.json",
        "simulation_white.csv",
        "simulation_worst_case_finite.json",
    ] {
        assert!(root.join("r_1").join(f).is_file(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(root.join("config.toml")).unwrap(), SMALL);
}

#[test]
fn stages_reload_previous_artifacts() {
    let dir = setup(SMALL);
    for stage in ["synthesize", "approximate", "realize", "evaluate", "simulate"] {
        let out = drro(dir.path(), &["--config", "run.toml", "--out", "out", stage]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let fresh = setup(SMALL);
    let out = drro(fresh.path(), &["realize", "--config", "run.toml", "--out", "out"]);
    assert_eq!(out.status.code(), Some(2), "realize without a fit must fail");
}

#[test]
fn zero_radius_is_rejected() {
    let dir = setup(SMALL);
    let out = drro(dir.path(), &["synthesize", "--config", "run.toml", "--radius", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "config");
    assert!(!dir.path().join("drro-out").join("r_0").exists());
}

#[test]
fn missing_model_fails_with_a_record() {
    let dir = setup("model = \"absent.toml\"\n");
    let out = drro(dir.path(), &["pipeline", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["exit_code"], 2);
    assert!(rec["message"].as_str().unwrap().contains("absent.toml"));
}

#[test]
fn unknown_keys_and_missing_config_are_config_errors() {
    let dir = setup("model = \"builtin:scalar\"\nradious = [1.0]\n");
    assert_eq!(drro(dir.path(), &["synthesize", "--config", "run.toml"]).status.code(), Some(2));
    assert_eq!(drro(dir.path(), &["synthesize"]).status.code(), Some(2));
    assert_eq!(drro(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn non_convergence_has_its_own_exit_code() {
    let dir = setup("model = \"builtin:ac15\"\nradii = [1e4]\n[synthesis]\ngrid = 256\nmax_iter = 5\n");
    let out = drro(dir.path(), &["synthesize", "--config", "run.toml", "--out", "out"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_record(&out)["error"], "solver_non_convergent");
    // The partial run is still on disk for inspection.
    assert!(dir.path().join("out/r_10000/trace.csv").is_file());
}

#[test]
fn output_directory_precedence() {
    let dir = setup(&format!("out = \"from_file\"\n{SMALL}"));
    let run = |args: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_drro"));
        cmd.current_dir(dir.path()).env_remove("DRRO_OUT").args(args);
        if let Some(e) = env {
            cmd.env("DRRO_OUT", e);
        }
        assert!(cmd.output().unwrap().status.success());
    };
    run(&["synthesize", "--config", "run.toml", "--out", "from_flag"], Some("from_env"));
    assert!(dir.path().join("from_flag/r_1/synthesis.json").is_file());
    run(&["synthesize", "--config", "run.toml"], Some("from_env"));
    assert!(dir.path().join("from_file/r_1/synthesis.json").is_file());
    assert!(!dir.path().join("from_env").exists());

    let plain = setup(SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_drro"))
        .current_dir(plain.path())
        .env("DRRO_OUT", "from_env")
        .args(["synthesize", "--config", "run.toml"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(plain.path().join("from_env/r_1/synthesis.json").is_file());
}

#[test]
fn repeated_runs_are_identical() {
    let dir = setup(SMALL);
    for o in ["a", "b"] {
        assert!(drro(dir.path(), &["pipeline", "--config", "run.toml", "--out", o]).status.success());
    }
    for f in ["summary.json", "r_1/simulation_white.json", "r_1/controller.toml"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

fn csv_column(path: &Path, column: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == column).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn small_radius_spectrum_is_nearly_white() {
    let dir = setup("model = \"builtin:ac15\"\n");
    let out = drro(dir.path(), &["synthesize", "--config", "run.toml", "--radius", "0.01", "--out", "out"]);
    assert!(out.status.success());
    let m = csv_column(&dir.path().join("out/r_0.01/m_star.csv"), "value");
    let (lo, hi) = m.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(lo > 0.99 && hi < 1.1, "spectrum spans [{lo}, {hi}]");
}

#[test]
fn first_order_fit_degrades_regret() {
    let dir = setup("model = \"builtin:ac15\"\n[simulation]\ntrials = 10\ndisturbances = [\"white\"]\n");
    let out = drro(dir.path(), &["pipeline", "--config", "run.toml", "--radius", "1", "--degree", "1", "--out", "out"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    let row = &summary["rows"][0];
    let (drro, rational) = (row["drro_regret"].as_f64().unwrap(), row["rational_regret"].as_f64().unwrap());
    assert!(rational > 1.5 * drro, "degree 1: {rational} vs {drro}");
}
