use std::fs;
use std::path::Path;
use std::process::Command;

use aerofed::experiment::plots::{read_rounds, CONVERGENCE_HEADER, DETECTION_HEADER, ENERGY_HEADER};
use aerofed::experiment::run::{read_key_values, ROUNDS_HEADER};
use aerofed::experiment::{evaluate_run, run, ExperimentConfig};

fn config(method: &str, episodes: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.set("run.method", method).unwrap();
    cfg.set("run.episodes", &episodes.to_string()).unwrap();
    cfg.set("run.checkpoint_every", "2").unwrap();
    cfg.set("run.seed", "5").unwrap();
    cfg.set("data.synthetic", "true").unwrap();
    cfg.set("data.synthetic_motes", "20").unwrap();
    cfg.set("data.synthetic_per_mote", "120").unwrap();
    cfg
}

fn summary(dir: &Path) -> Vec<(String, String)> {
    read_key_values(&dir.join("summary")).unwrap()
}

fn value(kv: &[(String, String)], key: &str) -> String {
    kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone()).unwrap()
}

#[test]
fn fl_all_selects_every_uav_each_episode() {
    let dir = tempfile::tempdir().unwrap();
    run(&config("fl-all", 4), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("rounds.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), ROUNDS_HEADER);
    let rows = read_rounds(&dir.path().join("rounds.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.selection_mask, "11111");
        assert!(r.energy_j <= 5.0 * 60.0);
    }
    assert_eq!(value(&summary(dir.path()), "strict_subset_fraction"), "0");
}

#[test]
fn standalone_never_uploads() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&config("standalone", 3), dir.path()).unwrap();
    assert!(out.rounds.iter().all(|r| r.energy.upload == 0.0));
    assert_eq!(value(&summary(dir.path()), "upload_energy_J"), "0");
    let per_uav = fs::read_dir(dir.path().join("checkpoints"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.starts_with("final.uav") && name.ends_with(".sidecar")
        })
        .count();
    assert_eq!(per_uav, 5);
    assert!(!dir.path().join("checkpoints/final.global.sidecar").exists());
}

#[test]
fn afl_run_writes_logs_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&config("afl-ca2c", 4), dir.path()).unwrap();
    let ckpt = dir.path().join("checkpoints");
    for f in [
        "ep0002.global.sidecar",
        "ep0004.global.sidecar",
        "ep0002.agent.sidecar",
        "final.agent.sidecar",
        "final.global.sidecar",
    ] {
        assert!(ckpt.join(f).exists(), "missing {f}");
    }
    let agent_log = fs::read_to_string(dir.path().join("agent.csv")).unwrap();
    assert_eq!(agent_log.lines().count(), 5);
    assert_eq!(fs::read_to_string(dir.path().join("snapshots.jsonl")).unwrap().lines().count(), 4);
    assert!(!dir.path().join("error").exists());

    let again = evaluate_run(dir.path()).unwrap();
    assert_eq!(again.counts, out.metrics.counts);
    let kv = summary(dir.path());
    assert_eq!(value(&kv, "method"), "afl-ca2c");
    assert_eq!(value(&kv, "tp"), out.metrics.counts.tp.to_string());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    run(&config("afl-ca2c", 3), a.path()).unwrap();
    let reloaded = ExperimentConfig::load(&a.path().join("config.resolved")).unwrap();
    assert_eq!(reloaded, config("afl-ca2c", 3));
    let b = tempfile::tempdir().unwrap();
    run(&reloaded, b.path()).unwrap();
    assert_eq!(
        fs::read(a.path().join("rounds.csv")).unwrap(),
        fs::read(b.path().join("rounds.csv")).unwrap()
    );
}

#[test]
fn seeds_change_the_trajectory() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut other = config("fl-all", 2);
    other.set("run.seed", "6").unwrap();
    run(&config("fl-all", 2), a.path()).unwrap();
    run(&other, b.path()).unwrap();
    assert_ne!(
        fs::read(a.path().join("rounds.csv")).unwrap(),
        fs::read(b.path().join("rounds.csv")).unwrap()
    );
}

#[test]
fn bad_config_is_rejected_with_key_name() {
    let err = ExperimentConfig::parse("[gan]\nK = 0\n").unwrap_err().to_string();
    assert!(err.contains("gan.K"), "{err}");
    let err = ExperimentConfig::parse("nonsense.key = 1\n").unwrap_err().to_string();
    assert!(err.contains("nonsense.key"), "{err}");
}

#[test]
fn missing_dataset_leaves_error_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("fl-all", 2);
    cfg.set("data.synthetic", "false").unwrap();
    cfg.set("data.path", dir.path().join("absent.txt").to_str().unwrap()).unwrap();
    assert!(run(&cfg, dir.path()).is_err());
    assert!(dir.path().join("error").exists());
    assert!(dir.path().join("config.resolved").exists());
}

#[test]
fn cli_run_then_evaluate() {
    let bin = env!("CARGO_BIN_EXE_aerofed");
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.cfg");
    fs::write(&cfg_path, config("fl-all", 2).to_text()).unwrap();
    let out_dir = dir.path().join("run");
    let status = Command::new(bin)
        .args(["run", "--config"])
        .arg(&cfg_path)
        .args(["--seed", "9", "--set", "scorer.quantile=0.9", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let printed = String::from_utf8(status.stdout).unwrap();
    assert!(printed.contains("method = fl-all"));
    assert!(printed.contains("seed = 9"));

    for (f, h) in [
        ("convergence.csv", CONVERGENCE_HEADER),
        ("energy.csv", ENERGY_HEADER),
        ("detection.csv", DETECTION_HEADER),
    ] {
        let text = fs::read_to_string(out_dir.join(f)).unwrap();
        assert_eq!(text.lines().next().unwrap(), h);
    }
    assert_eq!(fs::read_to_string(out_dir.join("convergence.csv")).unwrap().lines().count(), 3);

    let eval = Command::new(bin).arg("evaluate").arg("--out").arg(&out_dir).output().unwrap();
    assert!(eval.status.success());
    let f1_line = String::from_utf8(eval.stdout).unwrap().lines().find(|l| l.starts_with("f1 = ")).unwrap().to_string();
    assert_eq!(f1_line, format!("f1 = {}", value(&summary(&out_dir), "f1")));

    let bad = Command::new(bin).args(["run", "--set", "gan.K=0", "--synthetic", "--out"]).arg(dir.path().join("bad")).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("gan.K"));
}

#[test]
fn cli_gradcheck_passes() {
    let out = Command::new(env!("CARGO_BIN_EXE_aerofed")).args(["gradcheck", "--cases", "20"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("cases = 20"));
}
