//! End-to-end tests of the `lion` binary: artifact layout, configuration
//! precedence, error paths, ablation plumbing.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lion"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lion_cli_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        panic!(
            "command failed\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
    }
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

/// Small-but-nontrivial settings shared by the pipeline tests.
fn small_args(out_dir: &Path) -> Vec<String> {
    vec![
        "--out".into(),
        out_dir.display().to_string(),
        "--set".into(),
        "n_nodes=60".into(),
        "--set".into(),
        "d_m=4,4".into(),
        "--set".into(),
        "p_in=0.2".into(),
        "--set".into(),
        "p_out=0.08".into(),
        "--set".into(),
        "d_f=16".into(),
        "--set".into(),
        "h=8".into(),
        "--depth".into(),
        "2".into(),
        "--seed".into(),
        "5".into(),
    ]
}

#[test]
fn full_pipeline_produces_all_artifacts() {
    let dir = tmp_dir("pipeline");
    let args = small_args(&dir);
    run(bin().arg("gen-data").args(&args));
    let pre = run(bin().arg("precompute").args(&args));
    assert!(stdout(&pre).contains("wall-clock"), "{}", stdout(&pre));
    run(bin().arg("train").args(&args).args(["--epochs", "5"]));
    run(bin().arg("eval").args(&args));
    for file in [
        "config.echo",
        "dataset.mag",
        "stack.cgp1",
        "energies.csv",
        "train.csv",
        "metrics.json",
        "model.aha1",
        "head.bin",
    ] {
        assert!(dir.join(file).exists(), "missing {file}");
    }
    let metrics = std::fs::read_to_string(dir.join("metrics.json")).unwrap();
    assert!(metrics.contains("test_accuracy"), "{metrics}");
    let energies = std::fs::read_to_string(dir.join("energies.csv")).unwrap();
    assert_eq!(energies.lines().count(), 1 + 3, "header plus L+1 layers");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tmp_dir("determinism");
    let args = small_args(&dir);
    run(bin().arg("gen-data").args(&args));
    run(bin().arg("precompute").args(&args));
    let first = std::fs::read(dir.join("stack.cgp1")).unwrap();
    let ds_first = std::fs::read(dir.join("dataset.mag")).unwrap();
    run(bin().arg("gen-data").args(&args));
    run(bin().arg("precompute").args(&args));
    assert_eq!(std::fs::read(dir.join("dataset.mag")).unwrap(), ds_first);
    assert_eq!(std::fs::read(dir.join("stack.cgp1")).unwrap(), first);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_precedence_file_env_flags() {
    let dir = tmp_dir("precedence");
    let cfg_path = dir.join("run.cfg");
    std::fs::write(&cfg_path, "depth = 3\nn_nodes = 40\nd_m = 4,4\n").unwrap();
    // file only
    run(bin()
        .arg("gen-data")
        .args(["--config", &cfg_path.display().to_string(), "--out", &dir.display().to_string()]));
    let echo = std::fs::read_to_string(dir.join("config.echo")).unwrap();
    assert!(echo.contains("depth = 3"), "{echo}");
    // env overrides file
    run(bin()
        .arg("gen-data")
        .env("LION_DEPTH", "4")
        .args(["--config", &cfg_path.display().to_string(), "--out", &dir.display().to_string()]));
    let echo = std::fs::read_to_string(dir.join("config.echo")).unwrap();
    assert!(echo.contains("depth = 4"), "{echo}");
    // flag overrides both
    run(bin()
        .arg("gen-data")
        .env("LION_DEPTH", "4")
        .args(["--config", &cfg_path.display().to_string(), "--out", &dir.display().to_string()])
        .args(["--depth", "5"]));
    let echo = std::fs::read_to_string(dir.join("config.echo")).unwrap();
    assert!(echo.contains("depth = 5"), "{echo}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tmp_dir("unknown_key");
    let cfg_path = dir.join("bad.cfg");
    std::fs::write(&cfg_path, "not_a_key = 1\n").unwrap();
    let out = bin()
        .arg("gen-data")
        .args(["--config", &cfg_path.display().to_string()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not_a_key"), "{err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn train_without_cache_names_the_fix() {
    let dir = tmp_dir("no_cache");
    let args = small_args(&dir);
    run(bin().arg("gen-data").args(&args));
    let out = bin().arg("train").args(&args).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("precompute"), "{err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn stale_cache_is_detected() {
    let dir = tmp_dir("stale");
    let args = small_args(&dir);
    run(bin().arg("gen-data").args(&args));
    run(bin().arg("precompute").args(&args));
    // regenerate the dataset with another seed: hashes now disagree
    let mut other = args.clone();
    let pos = other.iter().position(|a| a == "--seed").unwrap();
    other[pos + 1] = "6".into();
    run(bin().arg("gen-data").args(&other));
    let out = bin().arg("train").args(&args).args(["--epochs", "1"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stale"), "{err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn ablate_produces_six_distinct_rows() {
    let dir = tmp_dir("ablate");
    let args = small_args(&dir);
    run(bin().arg("gen-data").args(&args));
    run(bin().arg("precompute").args(&args));
    run(bin().arg("ablate").args(&args).args(["--epochs", "3"]));
    let csv = std::fs::read_to_string(dir.join("ablate.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6, "{csv}");
    let variants: std::collections::HashSet<&str> =
        rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(variants.len(), 6, "{csv}");
    for v in ["full", "no_rotor", "no_potential", "no_energy", "no_consensus", "no_scale"] {
        assert!(variants.contains(v), "missing {v} in {csv}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn geometry_flags_are_accepted() {
    let dir = tmp_dir("flags");
    let args = small_args(&dir);
    run(bin().arg("gen-data").args(&args));
    run(bin()
        .arg("precompute")
        .args(&args)
        .args(["--rotor-angle-mode", "linear", "--literal-eq3"]));
    let echo = std::fs::read_to_string(dir.join("config.echo")).unwrap();
    assert!(echo.contains("rotor_angle_mode = linear"), "{echo}");
    assert!(echo.contains("literal_eq3 = true"), "{echo}");
    // training against a cache built under different settings still works
    // because the stack file carries its own provenance
    run(bin()
        .arg("train")
        .args(&args)
        .args(["--rotor-angle-mode", "linear", "--literal-eq3", "--epochs", "2"]));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn zero_epochs_evaluates_the_initialized_model() {
    let dir = tmp_dir("zero_epochs");
    let args = small_args(&dir);
    run(bin().arg("gen-data").args(&args));
    run(bin().arg("precompute").args(&args));
    run(bin().arg("train").args(&args).args(["--epochs", "0"]));
    let csv = std::fs::read_to_string(dir.join("train.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1, "header only: {csv}");
    assert!(dir.join("metrics.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn link_clustering_and_retrieval_tasks_run() {
    for (task, needle) in [
        ("link_prediction", "test_mrr"),
        ("node_clustering", "nmi"),
        ("modality_retrieval", "mrr_forward"),
    ] {
        let dir = tmp_dir(&format!("task_{task}"));
        let mut args = small_args(&dir);
        args.push("--task".into());
        args.push(task.into());
        run(bin().arg("gen-data").args(&args));
        run(bin().arg("precompute").args(&args));
        run(bin().arg("train").args(&args).args(["--epochs", "3"]));
        let metrics = std::fs::read_to_string(dir.join("metrics.json")).unwrap();
        assert!(metrics.contains(needle), "task {task}: {metrics}");
        std::fs::remove_dir_all(&dir).ok();
    }
}

#[test]
fn verify_writes_report_and_exits_clean() {
    let dir = tmp_dir("verify");
    run(bin()
        .arg("verify")
        .args(["--out", &dir.display().to_string(), "--seed", "0"]));
    let json = std::fs::read_to_string(dir.join("verify.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(report["passed"], serde_json::json!(true));
    assert!(report["checks"].as_array().unwrap().len() >= 12);
    for c in report["checks"].as_array().unwrap() {
        for field in ["name", "pass", "measured", "threshold", "runtime_s"] {
            assert!(!c[field].is_null(), "missing {field} in {c}");
        }
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_rotor_mode_flag_reruns_energy_checks_under_both_modes() {
    let dir = tmp_dir("verify_modes");
    run(bin().arg("verify").args([
        "--out",
        &dir.display().to_string(),
        "--rotor-angle-mode",
        "linear",
    ]));
    let json = std::fs::read_to_string(dir.join("verify.json")).unwrap();
    assert!(json.contains("energy_monotonic_squared"), "{json}");
    assert!(json.contains("energy_monotonic_linear"), "{json}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn gen_data_applies_corruption() {
    let dir = tmp_dir("corrupt");
    let mut args = small_args(&dir);
    args.extend(["--set".into(), "edge_drop=1.0".into()]);
    let out = run(bin().arg("gen-data").args(&args));
    assert!(stdout(&out).contains("0 undirected edges"), "{}", stdout(&out));
    std::fs::remove_dir_all(&dir).ok();
}
