use std::fs;
use std::path::Path;
use std::process::Command;

fn hoods(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hoods")).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn fixture(dir: &Path) {
    let out = dir.to_str().unwrap();
    let (code, text) = hoods(&["fixture", "--days", "1", "--buses-per-branch", "2", "--out", out]);
    assert_eq!(code, 0, "{text}");
}

#[test]
fn plan_runs_and_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = dir.path().join("results");
    let (code, text) = hoods(&["plan", dir.path().to_str().unwrap(), "--paradigm", "coor-flex-", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    for f in ["cost_breakdown.csv", "reinforcement.json", "dispatch.csv", "voltages.csv", "transformer_peaks.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn export_model_writes_lp_and_mps() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    for name in ["m.lp", "m.mps"] {
        let target = dir.path().join(name);
        let (code, text) = hoods(&["export-model", dir.path().to_str().unwrap(), "--out", target.to_str().unwrap()]);
        assert_eq!(code, 0, "{text}");
        assert!(fs::metadata(&target).unwrap().len() > 0);
    }
    let (code, _) = hoods(&["export-model", dir.path().to_str().unwrap(), "--model", "building", "--out", "x.lp"]);
    assert_eq!(code, 2);
}

#[test]
fn bad_input_exits_with_validation_code() {
    let (code, text) = hoods(&["plan", "/definitely/not/here"]);
    assert_eq!(code, 2, "{text}");
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let (code, text) = hoods(&["plan", dir.path().to_str().unwrap(), "--paradigm", "coor+flex-"]);
    assert_eq!(code, 2, "{text}");
    let (code, text) = hoods(&["aggregate", dir.path().to_str().unwrap(), "--typical-periods", "4"]);
    assert_eq!(code, 2, "{text}");
}

#[test]
fn unmeetable_demand_exits_with_infeasible_code() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let path = dir.path().join("series/h1_1_elec.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let (ts, _) = lines[13].split_once(',').unwrap();
    lines[13] = format!("{ts},100000");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let (code, text) = hoods(&["plan", dir.path().to_str().unwrap(), "--paradigm", "coor-flex-", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 3, "{text}");
}
