use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cmjlab(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("cfg.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_cmjlab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.join("out"))
        .env_remove("CMJ_SEED")
        .env_remove("CMJ_WORKERS")
        .output()
        .unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const BINARY: &str = r#"
seed = 11
[model]
variant = { kind = "binary_homogeneous", rate = 1.0 }
life = { law = "pareto", gamma = 1.5, x0 = 0.3333333333333333 }
"#;

#[test]
fn simulate_galton_watson() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
seed = 1
[model]
variant = { kind = "galton_watson", offspring = { law = "deterministic", k = 2 } }
life = { law = "constant", value = 1.0 }
[simulate]
n = 3
"#;
    let out = cmjlab(dir.path(), cfg, &["simulate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/forest_paths.csv")).unwrap();
    assert!(csv.starts_with("# config_sha256="));
    let s: Vec<i64> = data_rows(&csv).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(s, [0, 1, 2, 3]);
    let h: Vec<String> = data_rows(&csv).iter().map(|r| r[2].clone()).collect();
    assert_eq!(h, ["0", "1", "2", ""]);
}

#[test]
fn simulate_barren_forest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
seed = 1
[model]
variant = { kind = "galton_watson", offspring = { law = "deterministic", k = 0 } }
life = { law = "constant", value = 1.0 }
[simulate]
n = 3
"#;
    let out = cmjlab(dir.path(), cfg, &["simulate"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/forest_paths.csv")).unwrap();
    let s: Vec<i64> = data_rows(&csv).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(s, [0, -1, -2, -3]);
}

#[test]
fn laplace_targets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BINARY.replace("seed = 11\n", "seed = 11\np_grid = [100]\nlambda_grid = [0.0, 1.0]\n")
        + "[laplace]\nn_replicas = 200\n";
    let out = cmjlab(dir.path(), &cfg, &["laplace"]);
    assert!(matches!(out.status.code(), Some(0..=2)));
    let jsonl = fs::read_to_string(dir.path().join("out/reports.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(v["name"], "laplace_s");
    assert_eq!(v["seed"], 11);
    assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
    let targets: Vec<f64> = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["kind"] == "scored")
        .map(|r| r["target"].as_f64().unwrap())
        .collect();
    assert_eq!(targets.len(), 2);
    assert!((targets[0] - 1.0).abs() < 1e-12);
    assert!((targets[1] - 1.3259).abs() < 1e-4);
}

#[test]
fn config_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmjlab(dir.path(), &format!("{BINARY}\nunknown = 3\n"), &["tail"]);
    assert_eq!(out.status.code(), Some(64));
    let out = cmjlab(dir.path(), "seed = 1\n", &["tail"]);
    assert_eq!(out.status.code(), Some(64));
    let gw = r#"
seed = 1
[model]
variant = { kind = "galton_watson", offspring = { law = "deterministic", k = 1 } }
life = { law = "constant", value = 1.0 }
"#;
    let out = cmjlab(dir.path(), gw, &["laplace"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn reports_are_reproducible() {
    let cfg = BINARY.replace("seed = 11\n", "seed = 11\np_grid = [100, 1000]\n") + "[tail]\nn_samples = 20000\n";
    let read = |workers: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = cmjlab(dir.path(), &cfg, &["tail", "--workers", workers]);
        assert!(matches!(out.status.code(), Some(0..=2)));
        (
            fs::read(dir.path().join("out/reports.jsonl")).unwrap(),
            fs::read(dir.path().join("out/tail_mu_v.csv")).unwrap(),
        )
    };
    let one = read("1");
    assert_eq!(one, read("1"));
    assert_eq!(one, read("3"));
}

#[test]
fn seed_override_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    fs::write(&cfg_path, BINARY.to_string() + "[limit_sample]\nn_paths = 2\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cmjlab"))
        .args(["limit-sample", "--config"])
        .arg(&cfg_path)
        .arg("--output")
        .arg(dir.path().join("out"))
        .env("CMJ_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/limit_paths.csv")).unwrap();
    assert!(csv.lines().next().unwrap().ends_with("seed=99"));
    assert_eq!(csv.lines().count(), 2 + 2 * 1001);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 99);
}

#[test]
fn all_on_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
seed = 5
p_grid = [100, 1000, 10000]
tests = ["check-assumptions", "counterexample"]
[model]
variant = { kind = "counterexample", gamma_prime = 1.2 }
life = { law = "pareto", gamma = 1.5, x0 = 0.3 }
calibrate = true
[check_assumptions]
n_samples_r2 = 200000
[counterexample]
n_replicas = 400
"#;
    let out = cmjlab(dir.path(), cfg, &["all"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(1), "{stdout}");
    let jsonl = fs::read_to_string(dir.path().join("out/reports.jsonl")).unwrap();
    let reports: Vec<serde_json::Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let verdict = |name: &str| reports.iter().find(|r| r["name"] == name).unwrap()["verdict"].clone();
    assert_eq!(verdict("assumption_r2"), "FAIL");
    assert_eq!(verdict("counterexample"), "PASS", "{stdout}");
}
