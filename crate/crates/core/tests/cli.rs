use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cusp-bergman"));
    c.env_remove("CUSP_BERGMAN_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn data_lines(out: &Output) -> Vec<String> {
    String::from_utf8(out.stdout.clone()).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

#[test]
fn grid_produces_one_row_per_point() {
    let out = run(&["model-kernel", "--p", "12", "--grid", "s:-40:-4:100"]);
    assert_eq!(out.status.code(), Some(0));
    let lines = data_lines(&out);
    assert_eq!(lines[0], "z_abs,s,value,log_value,certified_relative_tail,terms_used");
    assert_eq!(lines.len(), 101);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# version: cusp-bergman "));
    assert!(text.contains("\"grid\":\"s:-40:-4:100\""));
}

#[test]
fn invalid_input_exits_with_config_code() {
    let out = run(&["model-kernel", "--p", "1", "--z-abs", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p >= 2"));
    assert_eq!(run(&["model-kernel", "--p", "5", "--z-abs", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["zeros", "--p", "8", "--annulus", "2:-2"]).status.code(), Some(2));
    let zero = bin().env("CUSP_BERGMAN_THREADS", "0").args(["selftest"]).output().unwrap();
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn runs_are_byte_identical() {
    let args = ["zeros", "--p", "8", "--samples", "60", "--seed", "9"];
    let a = run(&args);
    let b = bin().env("CUSP_BERGMAN_THREADS", "1").args(args).output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["zeros", "--p", "8", "--samples", "60", "--seed", "10"]);
    assert_ne!(a.stdout, c.stdout);
    // six roots per sample
    assert_eq!(data_lines(&a).len(), 1 + 60 * 6);
}

#[test]
fn json_output_echoes_config() {
    let out = run(&["--format", "json", "quotient-scan", "--p", "20", "--s-range", "-20:-4", "--points", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["command"], "quotient-scan");
    assert_eq!(v["config"]["p"], 20);
    assert_eq!(v["config"]["format"], "json");
    assert!(v["version"].as_str().unwrap().starts_with("cusp-bergman"));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("cusp-bergman-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("fs.csv");
    let out = run(&["fs-metric", "--p", "30", "--grid", "s:-30:-5:11", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 12);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains("FAIL"));
    assert!(text.contains("invariants hold"));
}

#[test]
fn version_flag() {
    let out = run(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("cusp-bergman 0.1.0"));
}
