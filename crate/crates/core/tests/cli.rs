use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_puzzle-lab"))
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("puzzle-lab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn reruns_are_byte_identical() {
    let run = || lab().args(["return-probs", "--n", "8", "--trials", "3000", "--seed", "5"]).output().unwrap();
    let (a, b) = (run(), run());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).contains("mc_same"));
}

#[test]
fn worker_flag_and_env_do_not_change_output() {
    let base = lab().args(["hitting", "--n", "6", "--trials", "2000", "--workers", "1"]).output().unwrap();
    let env = lab().args(["hitting", "--n", "6", "--trials", "2000"]).env("PUZZLE_WORKERS", "3").output().unwrap();
    assert_eq!(base.stdout, env.stdout);
}

#[test]
fn unknown_config_key_exits_2() {
    let p = scratch("bad.toml");
    std::fs::write(&p, "experiment = \"hitting\"\nsead = 3\n").unwrap();
    let out = lab().args(["run", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sead"));
}

#[test]
fn unknown_experiment_exits_2() {
    let p = scratch("id.toml");
    std::fs::write(&p, "experiment = \"shuffle\"\n").unwrap();
    let out = lab().args(["run", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment"));
}

#[test]
fn precondition_violation_exits_3() {
    let out = lab().args(["coupling", "--n", "6"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_run_writes_json() {
    let cfg = scratch("ok.toml");
    let out_path = scratch("ok.json");
    std::fs::write(&cfg, format!("experiment = \"eigen-sums\"\nn = 6\nout = {:?}\n", out_path.to_str().unwrap())).unwrap();
    let out = lab().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["rows"][0]["statistic"], "s1");
}

#[test]
fn accept_list_does_not_run() {
    let out = lab().args(["accept", "--list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(!text.contains("PASS"));
}

#[test]
fn accept_single_criterion() {
    let out = lab().args(["accept", "--only", "7,11", "--check-fixture"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    assert!(text.contains("match the bundled fixture"));
    let bad = lab().args(["accept", "--only", "13"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
