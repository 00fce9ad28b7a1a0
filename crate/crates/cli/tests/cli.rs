//! Drives the `eslab` binary: artefacts, exit codes and reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_eslab");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "0")
        .env("ES_LAB_THREADS", "1")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn quick_config(dir: &Path, num_ues: usize) -> String {
    let name = format!("k{num_ues}.json");
    let text = format!(
        r#"{{
  "network": {{"num_ues": {num_ues}}},
  "dqn": {{"episodes": 3, "steps_per_episode": 20, "batch_size": 16, "hidden_dims": [32], "checkpoint_every": 2}},
  "bench": {{"sims": 3}}
}}"#
    );
    fs::write(dir.join(&name), text).unwrap();
    name
}

#[test]
fn train_writes_the_artifact_contract() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let out = run(dir.path(), &["train", "--config", &cfg, "--xapp", "es1", "--out", "run", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.json", "train_log.csv", "meta.json"] {
        assert!(dir.path().join("run").join(f).is_file(), "{f} missing");
    }
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["xapp"], "es1");
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["config"]["dqn"]["seed"], 7);
    assert_eq!(meta["counters"]["env_steps"], 60);
    let log = fs::read_to_string(dir.path().join("run/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);
}

#[test]
fn es1_checkpoint_at_k50_has_input_dim_700() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), 50);
    let out = run(dir.path(), &["train", "--config", &cfg, "--xapp", "es1", "--out", "run", "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run/model.json")).unwrap()).unwrap();
    assert_eq!(model["layer_dims"][0], 700);
    assert_eq!(model["layer_dims"].as_array().unwrap().last().unwrap(), 24);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["train", "--config", "absent.json", "--xapp", "es1", "--out", "run", "--seed", "1"]);
    assert_eq!(code(&out), 2);

    fs::write(dir.path().join("bad.json"), "{\n  \"dqn\": {\n    \"gama\": 0.9\n  }\n}").unwrap();
    let out = run(dir.path(), &["train", "--config", "bad.json", "--xapp", "es1", "--out", "run", "--seed", "1"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    let cfg = quick_config(dir.path(), 10);
    let out = run(dir.path(), &["train", "--config", &cfg, "--xapp", "es3", "--out", "run", "--seed", "1"]);
    assert_eq!(code(&out), 2);
    let out = run(dir.path(), &["train", "--config", &cfg]);
    assert_eq!(code(&out), 2);
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("hot.json"),
        r#"{"network": {"num_ues": 10}, "reward": {"w_off": 1e38, "w_on": 1e38},
            "dqn": {"episodes": 3, "steps_per_episode": 20, "batch_size": 8, "hidden_dims": [8], "lr": 0.5}}"#,
    )
    .unwrap();
    let out = run(dir.path(), &["train", "--config", "hot.json", "--xapp", "es1", "--out", "run", "--seed", "1"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn eval_is_byte_identical_and_checks_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let k20 = quick_config(dir.path(), 20);
    assert_eq!(code(&run(dir.path(), &["train", "--config", &cfg, "--xapp", "es2", "--out", "run", "--seed", "3"])), 0);

    let eval = |csv: &str, episodes: &str| run(dir.path(), &["eval", "--model", "run/model.json", "--episodes", episodes, "--seed", "5", "--csv", csv]);
    assert_eq!(code(&eval("a.csv", "50")), 0);
    assert_eq!(code(&eval("b.csv", "50")), 0);
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 50 + 1);
    assert!(text.lines().last().unwrap().starts_with("aggregate,"));

    assert_eq!(code(&eval("empty.csv", "0")), 0);
    assert_eq!(fs::read_to_string(dir.path().join("empty.csv")).unwrap().lines().count(), 1);

    let out = run(dir.path(), &["eval", "--model", "run/model.json", "--episodes", "2", "--seed", "5", "--csv", "x.csv", "--config", &k20]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
}

#[test]
fn bench_lists_missing_checkpoints_and_runs_classic_policies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let out = run(dir.path(), &["bench", "--config", &cfg, "--policies", "dqn-es1,baseline", "--ue-counts", "10,20", "--csv", "b.csv"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("K=10") && err.contains("K=20"), "{err}");

    let args = ["bench", "--config", &cfg, "--policies", "heuristic,baseline", "--ue-counts", "10,20", "--sims", "5", "--oracle", "--csv", "b.csv", "--svg", "b.svg"];
    assert_eq!(code(&run(dir.path(), &args)), 0);
    let first = fs::read(dir.path().join("b.csv")).unwrap();
    let svg = fs::read(dir.path().join("b.svg")).unwrap();
    assert_eq!(code(&run(dir.path(), &args)), 0);
    assert_eq!(first, fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(svg, fs::read(dir.path().join("b.svg")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(2) == Some("5")));
}

#[test]
fn bench_uses_trained_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let out = run(dir.path(), &["train", "--config", &cfg, "--xapp", "es1", "--out", "models/es1_k10", "--seed", "2"]);
    assert_eq!(code(&out), 0);
    let out = run(dir.path(), &["bench", "--config", &cfg, "--policies", "dqn-es1,heuristic", "--ue-counts", "10", "--csv", "b.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert!(text.contains("dqn-es1,10,3,"));
}

#[test]
fn oracle_rows_and_guard() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), 10);
    let go = |mode: &str, csv: &str| run(dir.path(), &["oracle", "--config", &cfg, "--layouts", "6", "--mode", mode, "--csv", csv, "--seed", "4"]);
    assert_eq!(code(&go("assoc", "a.csv")), 0);
    assert_eq!(code(&go("matching", "m.csv")), 0);
    let rows = |f: &str| -> Vec<Vec<String>> {
        fs::read_to_string(dir.path().join(f))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    };
    let (a, m) = (rows("a.csv"), rows("m.csv"));
    assert_eq!(a.len(), 6);
    for (ra, rm) in a.iter().zip(&m) {
        assert_eq!(ra[0], rm[0]);
        assert!(rm[2].parse::<usize>().unwrap() >= ra[2].parse::<usize>().unwrap());
    }

    let big = serde_json::json!({"network": {"ru_positions": (0..11).map(|i| serde_json::json!([20.0 * f64::from(i), 250.0])).collect::<Vec<_>>()}});
    fs::write(dir.path().join("big.json"), big.to_string()).unwrap();
    let out = run(dir.path(), &["oracle", "--config", "big.json", "--layouts", "1", "--mode", "assoc", "--csv", "g.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("guard"));
}

#[test]
fn plot_warns_on_wide_windows_and_rejects_bad_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), 10);
    assert_eq!(code(&run(dir.path(), &["train", "--config", &cfg, "--xapp", "es1", "--out", "run", "--seed", "3"])), 0);
    let out = run(dir.path(), &["plot", "--train-log", "run/train_log.csv", "--window", "50", "--svg", "p.svg"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(fs::read_to_string(dir.path().join("p.svg")).unwrap().starts_with("<svg"));

    fs::write(dir.path().join("junk.csv"), "episode,mean_reward\nx,y\n").unwrap();
    let out = run(dir.path(), &["plot", "--train-log", "junk.csv", "--window", "5", "--svg", "q.svg"]);
    assert_eq!(code(&out), 2);
}
