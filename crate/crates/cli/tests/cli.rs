use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn ragkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ragkit"))
        .args(args)
        .output()
        .expect("spawn ragkit")
}

fn ok(args: &[&str]) -> Output {
    let out = ragkit(args);
    assert!(
        out.status.success(),
        "ragkit {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Converged safe set of the default MSD model (k = 60).
fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/msd_safe_set.json")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Exports the MSD model and computes a short-horizon safe set.
fn setup(dir: &Path, k: usize) -> (PathBuf, PathBuf) {
    ok(&["msd", "export", "--out", s(dir)]);
    let safe = dir.join("safe.json");
    ok(&[
        "safeset", "compute",
        "--model", s(&dir.join("model.json")),
        "--constraints", s(&dir.join("constraints.json")),
        "--k", &k.to_string(),
        "--samples", "500",
        "--out", s(&safe),
    ]);
    (dir.join("model.json"), safe)
}

#[test]
fn zero_iterations_reproduce_the_constraint_polygon() {
    let dir = tempfile::tempdir().unwrap();
    let (_, safe) = setup(dir.path(), 0);
    let set = read_json(&safe);
    let x = read_json(&dir.path().join("constraints.json"));
    assert_eq!(set["k"], 0);
    assert_eq!(set["dim"], x["dim"]);
    assert_eq!(set["pieces"], x["pieces"]);
    assert!(dir.path().join("safe.json.manifest.json").exists());
}

#[test]
fn malformed_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["msd", "export", "--out", s(dir.path())]);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"format\": \"pwa-v1\",\n  \"state_dim\": 2\n}\n").unwrap();
    let out = ragkit(&[
        "safeset", "compute",
        "--model", s(&bad),
        "--constraints", s(&dir.path().join("constraints.json")),
        "--k", "1",
        "--out", s(&dir.path().join("safe.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("line"), "{err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = ragkit(&["safeset", "compute", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--frobnicate"));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ragkit"))
        .args(["msd", "export", "--out", s(dir.path())])
        .env("RAGKIT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn governed_simulation_writes_the_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["msd", "export", "--out", s(dir.path())]);
    let (model, safe) = (dir.path().join("model.json"), fixture());
    let traj = dir.path().join("traj.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_ragkit"))
        .args([
            "govern", "simulate",
            "--model", s(&model),
            "--safe", s(&safe),
            "--policy", "constant:10",
            "--steps", "40",
            "--disturbance", "adversarial",
            "--seed", "3",
            "--out", s(&traj),
        ])
        .env("RAGKIT_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&traj).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x0,x1,u_phi0,u_safe0,mode,wp0,wp1,wa0,modified,objective"
    );
    assert_eq!(lines.count(), 40);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["modified_steps"].as_u64().unwrap() > 0);
}

#[test]
fn infeasible_start_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let (model, safe) = setup(dir.path(), 2);
    let out = ragkit(&[
        "govern", "simulate",
        "--model", s(&model),
        "--safe", s(&safe),
        "--policy", "constant:0",
        "--x0", "6,0",
        "--out", s(&dir.path().join("traj.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn safe_set_for_another_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.json");
    let mut p = serde_json::to_value(ragkit::msd::MsdParams::default()).unwrap();
    p["c"] = json!(0.6);
    fs::write(&params, p.to_string()).unwrap();
    let out = ragkit(&[
        "govern", "simulate",
        "--safe", s(&fixture()),
        "--policy", "constant:0",
        "--params", s(&params),
        "--out", s(&dir.path().join("traj.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different model"));
}

#[test]
fn train_distill_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let safe = fixture();
    let cfg = dir.path().join("rl.json");
    fs::write(
        &cfg,
        json!({"episodes": 2, "trajectories": 2, "steps": 15, "fit_samples": 64, "hidden": [8]})
            .to_string(),
    )
    .unwrap();
    let run = dir.path().join("run");
    ok(&[
        "rl", "train", "--env", "msd",
        "--config", s(&cfg),
        "--shield", s(&safe),
        "--seed", "1",
        "--out", s(&run),
    ]);
    let history = fs::read_to_string(run.join("history.csv")).unwrap();
    assert!(history.starts_with("episode,mean_reward,violation_rate"));
    assert_eq!(history.lines().count(), 3);
    assert!(run.join("manifest.json").exists());

    let dcfg = dir.path().join("distill.json");
    fs::write(
        &dcfg,
        json!({"dataset_size": 200, "rollout_steps": 20, "hidden": [8],
               "fit": {"epochs": 2, "batch_size": 32, "lr": 0.01, "momentum": 0.9, "seed": 0}})
        .to_string(),
    )
    .unwrap();
    let policy = dir.path().join("policy.json");
    let out = ok(&[
        "distill",
        "--expert", s(&run),
        "--config", s(&dcfg),
        "--out", s(&policy),
    ]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["train_samples"], 160);

    let metrics = dir.path().join("metrics.json");
    let out = ok(&[
        "evaluate",
        "--policy", s(&policy),
        "--rollouts", "4",
        "--steps", "30",
        "--disturbance", "random",
        "--out", s(&metrics),
    ]);
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, read_json(&metrics));
    assert_eq!(printed["rollouts"], 4);
    assert_eq!(printed["steps"], 120);
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        json!({
            "k_max": 60,
            "steps": 30,
            "monte_carlo_rollouts": 6,
            "traj_rollouts": 1,
            "nominal": {"episodes": 2, "trajectories": 2, "steps": 15, "fit_samples": 64, "hidden": [8]}
        })
        .to_string(),
    )
    .unwrap();
    let mut hashes = Vec::new();
    for run in ["a", "b"] {
        let cache = dir.path().join(format!("cache_{run}"));
        fs::create_dir(&cache).unwrap();
        fs::copy(fixture(), cache.join("safe_set.json")).unwrap();
        let out = dir.path().join(run);
        ok(&[
            "msd", "monte_carlo_500",
            "--seed", "7",
            "--config", s(&cfg),
            "--cache", s(&cache),
            "--out", s(&out),
        ]);
        assert!(out.join("manifest.json").exists());
        assert!(out.join("traj_000.csv").exists());
        hashes.push((
            fs::read(out.join("metrics.json")).unwrap(),
            fs::read(out.join("traj_000.csv")).unwrap(),
        ));
    }
    assert_eq!(hashes[0], hashes[1]);
    let m = read_json(&dir.path().join("a").join("metrics.json"));
    assert_eq!(m["rollouts"], 6);
}
