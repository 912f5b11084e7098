use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
profile = "quadrotor_sim"
seeds = [0, 1]
lambda_std = [0.0, 1.0]
bootstraps = 2
eval_passes = 2
iterations = 2
rollouts_per_iteration = 2
max_steps = 8
sgd_iters = 20
"#;

fn riskaware(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskaware")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_summarize_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let o = riskaware(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("8 metrics records"));

    let metrics = out.join("metrics.csv");
    let o = riskaware(&["summarize", "--metrics", metrics.to_str().unwrap(), "--thresholds", "0,0.3"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("point\tfinal_speed\t>=0\t>=0.3"));
    assert!(lines[1].starts_with("risk_averse-0-coll-10\t"));
    assert!(lines[2].starts_with("risk_averse-1-coll-10\t"));

    let log = out.join("runs/risk_averse-1-coll-10/seed-1/rollouts_iter0.json");
    let o = riskaware(&["replay", "--rollout-log", log.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("2 rollouts replayed"));
}

#[test]
fn output_dir_comes_from_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-config");
    let text = format!("{TINY}output_dir = {:?}\n", out.to_str().unwrap());
    let cfg = write_config(dir.path(), &text);
    let o = riskaware(&["run", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("metrics.csv").exists());
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{TINY}lambda_sdt = [1.0]\n"));
    let o = riskaware(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert!(!dir.path().join("o/metrics.csv").exists());
}

#[test]
fn missing_output_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let o = riskaware(&["run", "--config", &cfg]);
    assert!(!o.status.success());
}

#[test]
fn tampered_log_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    assert!(riskaware(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let log = out.join("runs/risk_averse-0-coll-10/seed-0/rollouts_iter1.json");
    let text = std::fs::read_to_string(&log).unwrap();
    let flipped = if text.contains("\"collided\":false") {
        text.replacen("\"collided\":false", "\"collided\":true", 1)
    } else {
        text.replacen("\"collided\":true", "\"collided\":false", 1)
    };
    assert_ne!(flipped, text);
    std::fs::write(&log, flipped).unwrap();
    assert!(!riskaware(&["replay", "--rollout-log", log.to_str().unwrap()]).status.success());
}
